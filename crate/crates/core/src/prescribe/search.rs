use std::cmp::Ordering;

use rayon::prelude::*;

use super::{
    AnchorSegment, CandidatePlane, PrescribeError, PrescriptionResult, Scorer, SearchConfig, SourceView, Winner,
};

/// Largest search space the exhaustive oracle will enumerate.
pub const DEFAULT_CANDIDATE_CAP: u128 = 50_000_000;

const EPS: f64 = 1e-9;

/// Scores every candidate and returns the `top` best, ordered by descending
/// score with ties broken by `key_cmp`. The order is independent of how the
/// work is split across threads.
pub(crate) fn rank<K: Copy + Send + Sync>(
    cands: &[K],
    score: impl Fn(&K) -> f64 + Sync,
    key_cmp: impl Fn(&K, &K) -> Ordering + Sync,
    top: usize,
) -> Vec<(K, f64)> {
    let mut scored: Vec<(K, f64)> = cands.par_iter().map(|c| (*c, score(c))).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| key_cmp(&a.0, &b.0)));
    scored.truncate(top);
    scored
}

/// Runs the coarse level and every refinement level, pooling the
/// neighborhoods of all incumbents and keeping the best few after each level.
/// Returns the winner, its score, the number of scored candidates and the
/// best score after each level.
pub(crate) fn refine<K: Copy + Send + Sync>(
    coarse: &[K],
    score: impl Fn(&K) -> f64 + Sync,
    key_cmp: impl Fn(&K, &K) -> Ordering + Sync,
    neighborhood: impl Fn(&K, usize) -> Vec<K>,
    config: &SearchConfig,
) -> (K, f64, usize, Vec<f64>) {
    let mut visited = coarse.len();
    let mut beam = rank(coarse, &score, &key_cmp, config.beam_after(0));
    let mut level_scores = vec![beam[0].1];
    for level in 1..config.levels.len() {
        let mut pooled: Vec<K> = beam.iter().flat_map(|(inc, _)| neighborhood(inc, level)).collect();
        pooled.sort_by(&key_cmp);
        pooled.dedup_by(|a, b| key_cmp(a, b) == Ordering::Equal);
        visited += pooled.len();
        beam = rank(&pooled, &score, &key_cmp, config.beam_after(level));
        level_scores.push(beam[0].1);
    }
    let (best, best_score) = beam[0];
    (best, best_score, visited, level_scores)
}

/// Integer offsets `-r..=r` in units of `step` covering a radius.
pub(crate) fn offsets(radius: f64, step: f64) -> std::ops::RangeInclusive<i64> {
    let n = (radius / step + EPS).floor() as i64;
    -n..=n
}

pub(crate) fn inclusive_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + EPS).floor() as i64;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

fn wrap_phi(phi: f64) -> f64 {
    let w = phi.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

struct Space {
    anchor_lo: usize,
    anchor_hi: usize,
    theta: (f64, f64),
    phi: (f64, f64),
    phi_wraps: bool,
}

impl Space {
    fn new(anchor: &AnchorSegment, config: &SearchConfig) -> Self {
        let last = anchor.sample_count() - 1;
        let (lo, hi) = config.anchor_range.unwrap_or((0, last));
        Self {
            anchor_lo: lo.min(last),
            anchor_hi: hi.min(last),
            theta: config.theta_range,
            phi: config.phi_range,
            phi_wraps: config.phi_wraps(),
        }
    }

    fn phi_grid(&self, step: f64) -> Vec<f64> {
        if self.phi_wraps {
            let n = ((360.0 / step) - EPS).ceil() as i64;
            let mut v: Vec<f64> = (0..n).map(|k| wrap_phi(self.phi.0 + k as f64 * step)).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        } else {
            inclusive_grid(self.phi.0, self.phi.1, step)
        }
    }

    fn coarse(&self, pos_step: usize, angle_step: f64) -> Vec<CandidatePlane> {
        let thetas = inclusive_grid(self.theta.0, self.theta.1, angle_step);
        let phis = self.phi_grid(angle_step);
        let mut out = Vec::new();
        for a in (self.anchor_lo..=self.anchor_hi).step_by(pos_step) {
            for &t in &thetas {
                for &p in &phis {
                    out.push(CandidatePlane::new(a, t, p));
                }
            }
        }
        out
    }

    fn neighborhood(
        &self,
        inc: &CandidatePlane,
        pos_step: usize,
        pos_radius: usize,
        angle_step: f64,
        angle_radius: f64,
    ) -> Vec<CandidatePlane> {
        let np = (pos_radius / pos_step) as i64;
        let mut anchors = Vec::new();
        for j in -np..=np {
            let a = inc.anchor_index as i64 + j * pos_step as i64;
            if a >= self.anchor_lo as i64 && a <= self.anchor_hi as i64 {
                anchors.push(a as usize);
            }
        }
        let thetas: Vec<f64> = offsets(angle_radius, angle_step)
            .map(|j| inc.angles.theta + j as f64 * angle_step)
            .filter(|t| *t >= self.theta.0 - EPS && *t <= self.theta.1 + EPS)
            .collect();
        let mut phis: Vec<f64> = offsets(angle_radius, angle_step)
            .map(|j| inc.angles.phi + j as f64 * angle_step)
            .filter_map(|p| {
                if self.phi_wraps {
                    Some(wrap_phi(p))
                } else if p >= self.phi.0 - EPS && p <= self.phi.1 + EPS {
                    Some(p)
                } else {
                    None
                }
            })
            .collect();
        phis.sort_by(f64::total_cmp);
        phis.dedup();
        let mut out = Vec::with_capacity(anchors.len() * thetas.len() * phis.len());
        for &a in &anchors {
            for &t in &thetas {
                for &p in &phis {
                    out.push(CandidatePlane::new(a, t, p));
                }
            }
        }
        out
    }
}

fn finish(
    anchor: &AnchorSegment,
    scorer: &Scorer<'_, '_>,
    best: CandidatePlane,
    score: f64,
    visited: usize,
    level_scores: Vec<f64>,
) -> PrescriptionResult {
    let plane = best.plane(anchor);
    PrescriptionResult {
        plane,
        score,
        winner: Winner::Plane(best),
        segments: scorer.segments(&plane),
        visited,
        level_scores,
        degenerate_zero_score: score == 0.0,
    }
}

/// Coarse-to-fine grid search over (anchor position, theta, phi).
///
/// The first level scans the whole configured range at the coarsest steps.
/// Every later level scans its own steps within `+-` the previous level's
/// step around each incumbent; `beam_widths` sets how many incumbents
/// survive each level. Ties go to the smallest (anchor, theta, phi).
pub fn pyramid_search(
    anchor: &AnchorSegment,
    sources: &[SourceView<'_>],
    config: &SearchConfig,
) -> Result<PrescriptionResult, PrescribeError> {
    config.validate()?;
    let scorer = Scorer::new(sources, config.sampling, config.aggregation);
    let space = Space::new(anchor, config);
    let score = |c: &CandidatePlane| scorer.score(&c.plane(anchor));
    let key = |a: &CandidatePlane, b: &CandidatePlane| a.key_cmp(b);

    let first = config.levels[0];
    let coarse = space.coarse(first.position_step, first.angle_step);
    let (best, best_score, visited, level_scores) = refine(
        &coarse,
        score,
        key,
        |inc, i| {
            let (prev, level) = (config.levels[i - 1], config.levels[i]);
            space.neighborhood(
                inc,
                level.position_step,
                prev.position_step,
                level.angle_step,
                prev.angle_step,
            )
        },
        config,
    );
    Ok(finish(anchor, &scorer, best, best_score, visited, level_scores))
}

/// Brute-force argmax at the finest configured steps over the configured
/// ranges; the verification oracle for [`pyramid_search`].
pub fn exhaustive_search(
    anchor: &AnchorSegment,
    sources: &[SourceView<'_>],
    config: &SearchConfig,
    cap: u128,
) -> Result<PrescriptionResult, PrescribeError> {
    config.validate()?;
    let finest = *config.levels.last().expect("validated");
    let space = Space::new(anchor, config);
    let anchors: Vec<usize> = (space.anchor_lo..=space.anchor_hi)
        .step_by(finest.position_step)
        .collect();
    let thetas = inclusive_grid(space.theta.0, space.theta.1, finest.angle_step);
    let phis = space.phi_grid(finest.angle_step);
    let size = anchors.len() as u128 * thetas.len() as u128 * phis.len() as u128;
    if size > cap {
        return Err(PrescribeError::SearchSpaceTooLarge { size, cap });
    }
    let scorer = Scorer::new(sources, config.sampling, config.aggregation);
    let (nt, np) = (thetas.len(), phis.len());
    let cand = |i: usize| CandidatePlane::new(anchors[i / (nt * np)], thetas[(i / np) % nt], phis[i % np]);
    let pick = |a: (CandidatePlane, f64), b: (CandidatePlane, f64)| match b.1.total_cmp(&a.1) {
        Ordering::Greater => b,
        Ordering::Less => a,
        Ordering::Equal => {
            if b.0.key_cmp(&a.0) == Ordering::Less {
                b
            } else {
                a
            }
        }
    };
    let (best, score) = (0..size as usize)
        .into_par_iter()
        .map(|i| {
            let c = cand(i);
            (c, scorer.score(&c.plane(anchor)))
        })
        .reduce_with(pick)
        .expect("search space is never empty");
    Ok(finish(anchor, &scorer, best, score, size as usize, vec![score]))
}
