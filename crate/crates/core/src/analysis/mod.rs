// Copyright 2026 The ctxalign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Diagnostics over retrieval reports: accuracy by part of speech and by
//! frequency-rank difference, 2-D projections of embedding spaces, and
//! correlation between alignment and downstream scores.

mod freq;
mod pca;
mod pos;

use serde::{Deserialize, Serialize};

pub use freq::{freq_rank_curve, FreqBin, FreqRankCurve, FrequencyRanks, RankTable, DEFAULT_BIN_EDGES};
pub use pca::{correlation, pca_project, project_word_pairs, projection_csv, Projection, ProjectionPoint};
pub use pos::{pos_breakdown, AccuracyRow, PosBreakdown, PosGroup, PosTable, Upos, UNTAGGED};

use crate::retrieval::{RetrievalReport, TokenRef};

/// Which retrieval directions an analysis draws its pairs from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalysisDirection {
    SrcToTgt,
    TgtToSrc,
    #[default]
    Both,
}

/// `(source position, target position, correct)` per evaluated pair.
fn pair_outcomes(report: &RetrievalReport, direction: AnalysisDirection) -> Vec<(TokenRef, TokenRef, bool)> {
    let fwd = report.src_to_tgt.outcomes.iter().map(|o| (o.query, o.gold, o.correct));
    let bwd = report.tgt_to_src.outcomes.iter().map(|o| (o.gold, o.query, o.correct));
    match direction {
        AnalysisDirection::SrcToTgt => fwd.collect(),
        AnalysisDirection::TgtToSrc => bwd.collect(),
        AnalysisDirection::Both => fwd.chain(bwd).collect(),
    }
}

fn source_outcomes(report: &RetrievalReport, direction: AnalysisDirection) -> impl Iterator<Item = (TokenRef, bool)> {
    pair_outcomes(report, direction).into_iter().map(|(s, _, c)| (s, c))
}

#[cfg(test)]
pub(crate) mod tests {
    use crate::retrieval::{DirectionReport, PairOutcome, RetrievalMode, RetrievalReport, Similarity, TokenRef};

    fn direction(outcomes: Vec<PairOutcome>) -> DirectionReport {
        let correct = outcomes.iter().filter(|o| o.correct).count();
        DirectionReport {
            accuracy: correct as f64 / outcomes.len() as f64,
            correct,
            evaluated: outcomes.len(),
            outcomes,
        }
    }

    /// Report whose pairs sit at identical source and target positions,
    /// with the same outcome in both directions.
    pub(crate) fn report_with(pairs: &[((usize, usize), bool)]) -> RetrievalReport {
        let outcomes: Vec<PairOutcome> = pairs
            .iter()
            .map(|&((s, t), correct)| {
                let r = TokenRef::new(s, t);
                PairOutcome {
                    query: r,
                    gold: r,
                    predicted: if correct { r } else { TokenRef::new(s + 1000, 0) },
                    correct,
                    score: 0.0,
                }
            })
            .collect();
        let fwd = direction(outcomes.clone());
        let bwd = direction(outcomes);
        RetrievalReport {
            mode: RetrievalMode::Contextual,
            sim: Similarity::Csls,
            k: 10,
            mean_accuracy: (fwd.accuracy + bwd.accuracy) / 2.0,
            src_to_tgt: fwd,
            tgt_to_src: bwd,
        }
    }
}
