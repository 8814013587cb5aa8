//! Detector ensembles: majority voting over member predictions, or
//! thresholded averaging of min-max-normalized member scores.

use std::fs;
use std::path::Path;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::detect::{
    fit, load_model, save_model, DetectError, DetectorModel, DetectorParams, FORMAT_VERSION,
};
use crate::util::quantile;

/// How member outputs are fused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteRule {
    MajorityVote,
    AverageScore,
}

impl VoteRule {
    pub fn parse(text: &str) -> Option<VoteRule> {
        match text.trim().to_ascii_lowercase().as_str() {
            "majority_vote" | "majority" => Some(VoteRule::MajorityVote),
            "average_score" | "average" => Some(VoteRule::AverageScore),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            VoteRule::MajorityVote => "majority_vote",
            VoteRule::AverageScore => "average_score",
        }
    }
}

/// Outcome of an exactly-split vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    Normal,
    Anomalous,
}

impl TieBreak {
    pub fn parse(text: &str) -> Option<TieBreak> {
        match text.trim().to_ascii_lowercase().as_str() {
            "normal" => Some(TieBreak::Normal),
            "anomalous" => Some(TieBreak::Anomalous),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TieBreak::Normal => "normal",
            TieBreak::Anomalous => "anomalous",
        }
    }
}

/// Fuses one sample's member votes. Strict majority decides; an exact split
/// (even member counts only, or no members at all) falls to `tie`.
pub fn combine_votes(votes: &[bool], tie: TieBreak) -> bool {
    let yes = votes.iter().filter(|&&v| v).count();
    match (2 * yes).cmp(&votes.len()) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Equal => tie == TieBreak::Anomalous,
        std::cmp::Ordering::Less => false,
    }
}

/// Ensemble-level settings; `contamination` sets the average-score τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub rule: VoteRule,
    #[serde(default)]
    pub tie_break: TieBreak,
    pub contamination: f64,
}

impl EnsembleParams {
    /// Short human-readable form for reports.
    pub fn describe(&self) -> String {
        format!(
            "ensemble(rule={}, tie_break={}, c={})",
            self.rule.name(),
            self.tie_break.name(),
            self.contamination
        )
    }
}

/// Saved min/max of a member's training scores, used to map raw member
/// scores into [0, 1] at query time.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MemberNorm {
    pub lo: f64,
    pub hi: f64,
}

impl MemberNorm {
    pub fn from_scores(scores: &[f64]) -> MemberNorm {
        let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        MemberNorm { lo, hi }
    }

    /// Degenerate ranges and non-finite inputs map to 0.5, everything else
    /// to the clipped affine rescaling.
    pub fn apply(&self, s: f64) -> f64 {
        if !self.lo.is_finite() || !self.hi.is_finite() || self.hi - self.lo <= 0.0 || !s.is_finite()
        {
            return 0.5;
        }
        ((s - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }
}

/// A fitted ensemble over one or more detectors sharing an input space.
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    pub params: EnsembleParams,
    pub members: Vec<DetectorModel>,
    pub norms: Vec<MemberNorm>,
    /// τ on the averaged normalized score (average-score rule).
    pub threshold: f64,
    pub dim: usize,
}

impl EnsembleModel {
    /// Mean of min-max-normalized member scores, per sample.
    pub fn score(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>, DetectError> {
        let mut acc = vec![0.0; x.ncols()];
        for (member, norm) in self.members.iter().zip(&self.norms) {
            for (a, s) in acc.iter_mut().zip(member.score(x)?) {
                *a += norm.apply(s);
            }
        }
        let m = self.members.len() as f64;
        for a in &mut acc {
            *a /= m;
        }
        Ok(acc)
    }

    /// Per-member boolean votes (member threshold applied), sample-major.
    pub fn member_votes(&self, x: ArrayView2<'_, f64>) -> Result<Vec<Vec<bool>>, DetectError> {
        let per_member: Vec<Vec<bool>> = self
            .members
            .iter()
            .map(|m| m.predict(x))
            .collect::<Result<_, _>>()?;
        Ok((0..x.ncols())
            .map(|t| per_member.iter().map(|v| v[t]).collect())
            .collect())
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<bool>, DetectError> {
        match self.params.rule {
            VoteRule::MajorityVote => Ok(self
                .member_votes(x)?
                .iter()
                .map(|votes| combine_votes(votes, self.params.tie_break))
                .collect()),
            VoteRule::AverageScore => {
                Ok(self.score(x)?.iter().map(|&s| s > self.threshold).collect())
            }
        }
    }
}

/// Fits every member on the columns of `x`, records score normalizers, and
/// (for the average rule) sets τ at the (1−contamination)-quantile of the
/// averaged normalized training scores.
pub fn fit_ensemble(
    x: ArrayView2<'_, f64>,
    members: &[DetectorParams],
    params: &EnsembleParams,
) -> Result<EnsembleModel, DetectError> {
    if members.is_empty() {
        return Err(DetectError::InvalidParameter(
            "ensemble needs at least one member".into(),
        ));
    }
    if params.rule == VoteRule::AverageScore
        && !(params.contamination > 0.0 && params.contamination <= 0.5)
    {
        return Err(DetectError::InvalidParameter(format!(
            "contamination must be in (0, 0.5], got {}",
            params.contamination
        )));
    }
    let fitted: Vec<DetectorModel> = members
        .iter()
        .map(|p| fit(x, p))
        .collect::<Result<_, _>>()?;
    ensemble_from_members(fitted, params, x)
}

/// Assembles an ensemble around already-fitted members (all trained on the
/// columns of `x`), deriving normalizers and the average-score τ.
pub fn ensemble_from_members(
    members: Vec<DetectorModel>,
    params: &EnsembleParams,
    x: ArrayView2<'_, f64>,
) -> Result<EnsembleModel, DetectError> {
    if members.is_empty() {
        return Err(DetectError::InvalidParameter(
            "ensemble needs at least one member".into(),
        ));
    }
    if let Some(bad) = members.iter().find(|m| m.dim != x.nrows()) {
        return Err(DetectError::DimensionMismatch {
            expected: x.nrows(),
            got: bad.dim,
        });
    }
    let norms: Vec<MemberNorm> = members
        .iter()
        .map(|m| MemberNorm::from_scores(&m.train_scores))
        .collect();
    let mut model = EnsembleModel {
        params: *params,
        members,
        norms,
        threshold: 0.0,
        dim: x.nrows(),
    };
    if params.rule == VoteRule::AverageScore {
        let train = model.score(x)?;
        model.threshold = quantile(&train, 1.0 - params.contamination);
    }
    Ok(model)
}

/// On-disk container; member models live in sibling files it names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleFile {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub params: EnsembleParams,
    pub threshold: f64,
    pub dim: usize,
    pub norms: Vec<MemberNorm>,
    /// Member model file names, relative to this file's directory.
    pub member_files: Vec<String>,
}

/// Writes `<stem>.member<i>.json` next to `path` for each member, then the
/// container itself at `path`.
pub fn save_ensemble(
    path: &Path,
    model: &EnsembleModel,
    config_hash: Option<&str>,
) -> Result<(), DetectError> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("ensemble");
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut member_files = Vec::new();
    for (i, member) in model.members.iter().enumerate() {
        let name = format!("{stem}.member{i}.json");
        save_model(&dir.join(&name), member, config_hash)?;
        member_files.push(name);
    }
    let file = EnsembleFile {
        format_version: FORMAT_VERSION,
        config_hash: config_hash.map(str::to_owned),
        params: model.params,
        threshold: model.threshold,
        dim: model.dim,
        norms: model.norms.clone(),
        member_files,
    };
    fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_ensemble(path: &Path) -> Result<(EnsembleModel, Option<String>), DetectError> {
    let text = fs::read_to_string(path)?;
    let file: EnsembleFile = serde_json::from_str(&text)?;
    if file.format_version != FORMAT_VERSION {
        return Err(DetectError::BadFormatVersion {
            found: file.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut members = Vec::new();
    for name in &file.member_files {
        let loaded = load_model(&dir.join(name))?;
        if loaded.model.dim != file.dim {
            return Err(DetectError::DimensionMismatch {
                expected: file.dim,
                got: loaded.model.dim,
            });
        }
        members.push(loaded.model);
    }
    if members.len() != file.norms.len() {
        return Err(DetectError::InvalidParameter(format!(
            "{} member files but {} normalizers",
            members.len(),
            file.norms.len()
        )));
    }
    Ok((
        EnsembleModel {
            params: file.params,
            members,
            norms: file.norms,
            threshold: file.threshold,
            dim: file.dim,
        },
        file.config_hash,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::GammaSpec;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cluster_with_outlier(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((2, n + 1));
        for t in 0..n {
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let r = (-2.0 * u1.ln()).sqrt();
            x[[0, t]] = r * (2.0 * std::f64::consts::PI * u2).cos();
            x[[1, t]] = r * (2.0 * std::f64::consts::PI * u2).sin();
        }
        x[[0, n]] = 12.0;
        x[[1, n]] = -11.0;
        x
    }

    fn three_members() -> Vec<DetectorParams> {
        vec![
            DetectorParams::IForest {
                n_trees: 50,
                subsample: 64,
                contamination: 0.02,
                seed: 5,
            },
            DetectorParams::Lof {
                k: 5,
                contamination: 0.02,
            },
            DetectorParams::OcSvm {
                nu: 0.05,
                gamma: GammaSpec::Scale,
                tol: 1e-4,
                max_iter: 1000,
            },
        ]
    }

    #[test]
    fn vote_truth_tables_for_small_committees() {
        for members in 1..=5usize {
            for mask in 0..(1u32 << members) {
                let votes: Vec<bool> = (0..members).map(|i| mask >> i & 1 == 1).collect();
                let yes = votes.iter().filter(|&&v| v).count();
                let expect_normal = 2 * yes > members;
                let expect_anomalous = 2 * yes >= members;
                assert_eq!(combine_votes(&votes, TieBreak::Normal), expect_normal);
                assert_eq!(combine_votes(&votes, TieBreak::Anomalous), expect_anomalous);
            }
        }
    }

    #[test]
    fn votes_are_monotone_and_order_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let n = rng.gen_range(1..=7);
            let mut votes: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            for tie in [TieBreak::Normal, TieBreak::Anomalous] {
                let before = combine_votes(&votes, tie);
                // flipping any vote to anomalous never un-flags the sample
                for i in 0..n {
                    let mut up = votes.clone();
                    up[i] = true;
                    assert!(combine_votes(&up, tie) >= before);
                }
                // order independence
                let k = rng.gen_range(0..n);
                votes.rotate_left(k);
                assert_eq!(combine_votes(&votes, tie), before);
            }
        }
    }

    #[test]
    fn both_rules_flag_the_planted_outlier() {
        let x = cluster_with_outlier(150, 11);
        for rule in [VoteRule::MajorityVote, VoteRule::AverageScore] {
            let model = fit_ensemble(
                x.view(),
                &three_members(),
                &EnsembleParams {
                    rule,
                    tie_break: TieBreak::Normal,
                    contamination: 0.02,
                },
            )
            .unwrap();
            let flags = model.predict(x.view()).unwrap();
            assert!(flags[150], "{} missed the outlier", rule.name());
            let scores = model.score(x.view()).unwrap();
            assert!(scores.iter().all(|&s| (0.0..=1.0).contains(&s)));
            let max_inlier = scores[..150].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(scores[150] > max_inlier);
        }
    }

    #[test]
    fn constant_member_scores_normalize_to_half() {
        let x = Array2::from_elem((2, 30), 7.0);
        let model = fit_ensemble(
            x.view(),
            &[DetectorParams::IForest {
                n_trees: 10,
                subsample: 16,
                contamination: 0.1,
                seed: 0,
            }],
            &EnsembleParams {
                rule: VoteRule::AverageScore,
                tie_break: TieBreak::Normal,
                contamination: 0.1,
            },
        )
        .unwrap();
        let scores = model.score(x.view()).unwrap();
        assert!(scores.iter().all(|&s| s == 0.5));
    }

    #[test]
    fn average_rule_respects_contamination_on_training_data() {
        let x = cluster_with_outlier(199, 4);
        let model = fit_ensemble(
            x.view(),
            &three_members(),
            &EnsembleParams {
                rule: VoteRule::AverageScore,
                tie_break: TieBreak::Normal,
                contamination: 0.05,
            },
        )
        .unwrap();
        let flags = model.predict(x.view()).unwrap();
        let frac = flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64;
        assert!(frac <= 0.05 + 1e-9, "flagged fraction {frac}");
    }

    #[test]
    fn empty_member_list_is_rejected() {
        let x = cluster_with_outlier(20, 1);
        let err = fit_ensemble(
            x.view(),
            &[],
            &EnsembleParams {
                rule: VoteRule::MajorityVote,
                tie_break: TieBreak::Normal,
                contamination: 0.1,
            },
        )
        .unwrap_err();
        assert!(matches!(err, DetectError::InvalidParameter(_)));
    }

    #[test]
    fn container_round_trip_scores_bit_exact() {
        let x = cluster_with_outlier(80, 6);
        let model = fit_ensemble(
            x.view(),
            &three_members(),
            &EnsembleParams {
                rule: VoteRule::AverageScore,
                tie_break: TieBreak::Anomalous,
                contamination: 0.05,
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ens.json");
        save_ensemble(&path, &model, Some("44aa")).unwrap();
        assert!(dir.path().join("ens.member0.json").exists());
        assert!(dir.path().join("ens.member2.json").exists());
        let (loaded, hash) = load_ensemble(&path).unwrap();
        assert_eq!(hash.as_deref(), Some("44aa"));
        assert_eq!(loaded.params, model.params);
        let before = model.score(x.view()).unwrap();
        let after = loaded.score(x.view()).unwrap();
        let bits = |v: &[f64]| v.iter().map(|s| s.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&before), bits(&after));
        assert_eq!(
            model.predict(x.view()).unwrap(),
            loaded.predict(x.view()).unwrap()
        );
    }

    #[test]
    fn rule_and_tie_names_parse() {
        assert_eq!(VoteRule::parse("majority"), Some(VoteRule::MajorityVote));
        assert_eq!(VoteRule::parse("average_score"), Some(VoteRule::AverageScore));
        assert_eq!(VoteRule::parse("nope"), None);
        assert_eq!(TieBreak::parse("anomalous"), Some(TieBreak::Anomalous));
        assert_eq!(TieBreak::default(), TieBreak::Normal);
    }
}
