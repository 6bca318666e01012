//! Residual-error histograms and single/multi-layer Otsu thresholding.
//!
//! Residuals are binned into `L` equal-width intervals over `(0, H_max]`
//! where `H_max` is the largest residual. A split index `k` separates the
//! intervals into a low-residual and a high-residual class; the chosen split
//! maximizes the between-class variance. Multi-layer thresholding re-applies
//! the split inside the low-residual class `d` times, renormalizing the
//! interval probabilities to the surviving member count each layer. The
//! histogram itself is built once and never rebuilt across layers.

use crate::{Error, Result};

/// Fixed-width histogram over residual errors.
#[derive(Debug, Clone)]
pub struct ResidualHistogram {
    interval_count: usize,
    interval_width: f64,
    counts: Vec<usize>,
    upper_bound: f64,
    /// 1-based interval index per input residual, in input order.
    bins: Vec<usize>,
}

impl ResidualHistogram {
    pub fn interval_count(&self) -> usize {
        self.interval_count
    }

    pub fn interval_width(&self) -> f64 {
        self.interval_width
    }

    pub fn upper_bound(&self) -> f64 {
        self.upper_bound
    }

    /// Count of residuals in the 1-based interval `l`.
    pub fn count(&self, l: usize) -> usize {
        self.counts[l - 1]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// 1-based interval index of the `i`-th input residual.
    pub fn bin_of(&self, i: usize) -> usize {
        self.bins[i]
    }
}

/// Outcome of a single Otsu split over a histogram range.
#[derive(Debug, Clone)]
pub struct OtsuSplit {
    /// 1-based split interval index.
    pub split_index: usize,
    /// Threshold value `split_index * interval_width`.
    pub threshold: f64,
    /// Between-class variance per candidate `k` (1-based, NaN where the
    /// split was inadmissible). Diagnostic only.
    pub variance_curve: Vec<f64>,
}

/// One layer of a multi-layer thresholding pass.
#[derive(Debug, Clone)]
pub struct LayerSplit {
    pub threshold: f64,
    pub split_index: usize,
    /// Indices (into the input residual list) at or below the threshold.
    pub lower_group: Vec<usize>,
    /// Indices expelled from the previous layer's lower group.
    pub upper_group: Vec<usize>,
}

/// Final result of [`multilayer_threshold`].
#[derive(Debug, Clone)]
pub struct ThresholdResult {
    pub threshold: f64,
    pub split_index: usize,
    pub lower_group: Vec<usize>,
    /// Complement of `lower_group` within the full input set.
    pub upper_group: Vec<usize>,
    /// Per-layer splits actually computed (may be shorter than the requested
    /// depth when a layer admits no further split).
    pub layers: Vec<LayerSplit>,
    pub variance_curve: Option<Vec<f64>>,
}

/// Bins residuals into `interval_count` equal intervals over `(0, max]`.
///
/// Returns `None` when every residual is exactly zero; callers treat that as
/// an already-converged (perfect-fit) state.
pub fn build_histogram(
    residuals: &[f64],
    interval_count: usize,
) -> Result<Option<ResidualHistogram>> {
    if residuals.is_empty() {
        return Err(Error::InvalidArgument("empty residual list".into()));
    }
    if interval_count == 0 {
        return Err(Error::InvalidArgument("interval count must be positive".into()));
    }
    let mut upper_bound = 0.0_f64;
    for (i, &r) in residuals.iter().enumerate() {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "residual {i} is {r}, expected finite and non-negative"
            )));
        }
        upper_bound = upper_bound.max(r);
    }
    if upper_bound == 0.0 {
        return Ok(None);
    }
    let interval_width = upper_bound / interval_count as f64;
    let mut counts = vec![0usize; interval_count];
    let mut bins = Vec::with_capacity(residuals.len());
    for &r in residuals {
        // intervals are left-open, so r = 0 is clamped into the first one
        let bin = ((r / interval_width).ceil() as usize).clamp(1, interval_count);
        counts[bin - 1] += 1;
        bins.push(bin);
    }
    Ok(Some(ResidualHistogram {
        interval_count,
        interval_width,
        counts,
        upper_bound,
        bins,
    }))
}

/// Single Otsu split over intervals `[1, search_upper_index]`.
///
/// `member_count` must equal the total count over that range; interval
/// probabilities are normalized by it. Returns `None` when fewer than two
/// intervals in range are non-empty (no admissible split). Ties on the
/// between-class variance break toward the smallest split index.
pub fn otsu_threshold(
    hist: &ResidualHistogram,
    search_upper_index: usize,
    member_count: usize,
) -> Result<Option<OtsuSplit>> {
    if search_upper_index < 1 || search_upper_index > hist.interval_count {
        return Err(Error::InvalidArgument(format!(
            "search upper index {search_upper_index} out of range [1, {}]",
            hist.interval_count
        )));
    }
    if member_count == 0 {
        return Err(Error::InvalidArgument("member count must be positive".into()));
    }
    let range = &hist.counts[..search_upper_index];
    debug_assert_eq!(range.iter().sum::<usize>(), member_count);
    if range.iter().filter(|&&n| n > 0).count() < 2 {
        return Ok(None);
    }

    let total = member_count as f64;
    let mut cum_count = 0usize;
    let mut cum_prob = 0.0_f64;
    let mut cum_mean = 0.0_f64;
    // overall mean of the (renormalized) range
    let overall_mean: f64 = range
        .iter()
        .enumerate()
        .map(|(idx, &n)| (idx + 1) as f64 * n as f64 / total)
        .sum();

    let mut curve = vec![f64::NAN; search_upper_index];
    let mut best: Option<(usize, f64)> = None;
    for k in 1..=search_upper_index {
        cum_count += range[k - 1];
        let p = range[k - 1] as f64 / total;
        cum_prob += p;
        cum_mean += k as f64 * p;
        // skip splits where one class is empty
        if cum_count == 0 || cum_count == member_count {
            continue;
        }
        let num = overall_mean * cum_prob - cum_mean;
        let eta = num * num / (cum_prob * (1.0 - cum_prob));
        curve[k - 1] = eta;
        if best.map_or(true, |(_, b)| eta > b) {
            best = Some((k, eta));
        }
    }
    let (split_index, _) = best.expect("non-empty admissible split set");
    Ok(Some(OtsuSplit {
        split_index,
        threshold: split_index as f64 * hist.interval_width,
        variance_curve: curve,
    }))
}

/// Multi-layer Otsu thresholding over a residual list.
///
/// Builds the histogram once, then applies `depth` successive splits, each
/// restricted to the previous layer's low-residual intervals. If a layer has
/// no admissible split, the previous layer's result is returned.
pub fn multilayer_threshold(
    residuals: &[f64],
    interval_count: usize,
    depth: usize,
) -> Result<ThresholdResult> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let hist = match build_histogram(residuals, interval_count)? {
        Some(h) => h,
        // perfect fit: everything is an inlier at threshold zero
        None => {
            return Ok(ThresholdResult {
                threshold: 0.0,
                split_index: 0,
                lower_group: (0..residuals.len()).collect(),
                upper_group: Vec::new(),
                layers: Vec::new(),
                variance_curve: None,
            });
        }
    };

    // layer 0: the full range
    let mut split_index = hist.interval_count;
    let mut member_count = residuals.len();
    let mut lower_group: Vec<usize> = (0..residuals.len()).collect();
    let mut layers: Vec<LayerSplit> = Vec::with_capacity(depth);
    let mut curve = None;

    for _ in 0..depth {
        let split = match otsu_threshold(&hist, split_index, member_count)? {
            Some(s) => s,
            None => break,
        };
        let (new_lower, expelled): (Vec<usize>, Vec<usize>) = lower_group
            .iter()
            .partition(|&&i| hist.bin_of(i) <= split.split_index);
        layers.push(LayerSplit {
            threshold: split.threshold,
            split_index: split.split_index,
            lower_group: new_lower.clone(),
            upper_group: expelled,
        });
        split_index = split.split_index;
        member_count = new_lower.len();
        lower_group = new_lower;
        curve = Some(split.variance_curve);
    }

    let threshold = layers
        .last()
        .map_or(hist.upper_bound, |l| l.threshold);
    let split_index = layers.last().map_or(hist.interval_count, |l| l.split_index);
    let mut in_lower = vec![false; residuals.len()];
    for &i in &lower_group {
        in_lower[i] = true;
    }
    let upper_group: Vec<usize> = (0..residuals.len()).filter(|&i| !in_lower[i]).collect();
    Ok(ThresholdResult {
        threshold,
        split_index,
        lower_group,
        upper_group,
        layers,
        variance_curve: curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Independent brute-force argmax of the between-class variance; direct
    /// double sums, no cumulative recurrences.
    pub(crate) fn brute_force_otsu(counts: &[usize], upper: usize, members: usize) -> Option<usize> {
        if counts[..upper].iter().filter(|&&n| n > 0).count() < 2 {
            return None;
        }
        let total = members as f64;
        let mu_bar: f64 = (1..=upper).map(|l| l as f64 * counts[l - 1] as f64 / total).sum();
        let mut best: Option<(usize, f64)> = None;
        for k in 1..=upper {
            let cum: usize = counts[..k].iter().sum();
            if cum == 0 || cum == members {
                continue;
            }
            let p_k: f64 = (1..=k).map(|l| counts[l - 1] as f64 / total).sum();
            let mu_k: f64 = (1..=k).map(|l| l as f64 * counts[l - 1] as f64 / total).sum();
            let eta = (mu_bar * p_k - mu_k).powi(2) / (p_k * (1.0 - p_k));
            if best.map_or(true, |(_, b)| eta > b) {
                best = Some((k, eta));
            }
        }
        best.map(|(k, _)| k)
    }

    #[test]
    fn single_value_lands_at_upper_bound() {
        let hist = build_histogram(&[1.0; 10], 200).unwrap().unwrap();
        assert_eq!(hist.count(200), 10);
        assert_relative_eq!(hist.upper_bound(), 1.0);
        assert_eq!(hist.counts()[..199].iter().sum::<usize>(), 0);
    }

    #[test]
    fn hand_binning_four_intervals() {
        let hist = build_histogram(&[0.25, 0.5, 0.75, 1.0], 4).unwrap().unwrap();
        assert_eq!(hist.counts(), &[1, 1, 1, 1]);
        assert_relative_eq!(hist.interval_width(), 0.25);
    }

    #[test]
    fn zero_residual_goes_to_first_interval() {
        let hist = build_histogram(&[0.0, 1.0], 4).unwrap().unwrap();
        assert_eq!(hist.bin_of(0), 1);
        assert_eq!(hist.counts().iter().sum::<usize>(), 2);
    }

    #[test]
    fn all_zero_residuals_signal_degenerate() {
        assert!(build_histogram(&[0.0, 0.0], 10).unwrap().is_none());
    }

    #[test]
    fn rejects_negative_and_nan() {
        assert!(build_histogram(&[-1.0], 10).is_err());
        assert!(build_histogram(&[f64::NAN], 10).is_err());
        assert!(build_histogram(&[], 10).is_err());
    }

    #[test]
    fn two_cluster_split_matches_brute_force() {
        let mut residuals = Vec::new();
        // 50 residuals in interval 10, 50 in interval 190 of L=200
        residuals.extend(std::iter::repeat(0.0475).take(50));
        residuals.extend(std::iter::repeat(0.9475).take(50));
        residuals.push(1.0); // pins H_max so the clusters land at intervals 10 and 190
        let hist = build_histogram(&residuals, 200).unwrap().unwrap();
        let split = otsu_threshold(&hist, 200, residuals.len()).unwrap().unwrap();
        let oracle = brute_force_otsu(hist.counts(), 200, residuals.len()).unwrap();
        assert_eq!(split.split_index, oracle);
        assert!((10..190).contains(&split.split_index));
        // split must separate the two clusters
        let lower: Vec<_> = (0..residuals.len())
            .filter(|&i| residuals[i] <= split.threshold)
            .collect();
        assert_eq!(lower.len(), 50);
    }

    #[test]
    fn single_class_has_no_split() {
        let hist = build_histogram(&[1.0; 10], 200).unwrap().unwrap();
        assert!(otsu_threshold(&hist, 200, 10).unwrap().is_none());
    }

    #[test]
    fn uniform_counts_split_near_middle() {
        // one residual per interval over intervals 1..100
        let residuals: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        let hist = build_histogram(&residuals, 100).unwrap().unwrap();
        let split = otsu_threshold(&hist, 100, 100).unwrap().unwrap();
        let oracle = brute_force_otsu(hist.counts(), 100, 100).unwrap();
        assert_eq!(split.split_index, oracle);
        assert!((49..=51).contains(&split.split_index));
    }

    #[test]
    fn depth_one_equals_single_threshold() {
        let residuals: Vec<f64> = (1..=50).map(|i| (i as f64 * 0.37).sin().abs() + 0.01).collect();
        let hist = build_histogram(&residuals, 200).unwrap().unwrap();
        let single = otsu_threshold(&hist, 200, 50).unwrap().unwrap();
        let multi = multilayer_threshold(&residuals, 200, 1).unwrap();
        assert_eq!(multi.split_index, single.split_index);
        assert_relative_eq!(multi.threshold, single.threshold);
    }

    #[test]
    fn two_layers_isolate_lowest_of_three_clusters() {
        let mut residuals = Vec::new();
        residuals.extend(std::iter::repeat(0.01).take(34));
        residuals.extend(std::iter::repeat(0.5).take(33));
        residuals.extend(std::iter::repeat(1.0).take(33));
        let result = multilayer_threshold(&residuals, 200, 2).unwrap();
        let expected: Vec<usize> = (0..34).collect();
        assert_eq!(result.lower_group, expected);

        // oracle: brute-force two-pass over the same fixed histogram
        let hist = build_histogram(&residuals, 200).unwrap().unwrap();
        let k1 = brute_force_otsu(hist.counts(), 200, 100).unwrap();
        let m1: usize = hist.counts()[..k1].iter().sum();
        let k2 = brute_force_otsu(hist.counts(), k1, m1).unwrap();
        assert_eq!(result.split_index, k2);
    }

    #[test]
    fn no_split_layer_returns_previous_result() {
        // single cluster: layer 1 already has no admissible split
        let result = multilayer_threshold(&[1.0; 10], 200, 3).unwrap();
        assert!(result.layers.is_empty());
        assert_eq!(result.lower_group.len(), 10);
        assert_relative_eq!(result.threshold, 1.0);
    }

    #[test]
    fn monotone_layering_and_partition() {
        let residuals: Vec<f64> = (0..300)
            .map(|i| ((i * 2654435761_usize) % 1000) as f64 / 1000.0 + 0.001)
            .collect();
        let result = multilayer_threshold(&residuals, 200, 3).unwrap();
        let mut prev_threshold = f64::INFINITY;
        let mut prev_group: Vec<usize> = (0..residuals.len()).collect();
        for layer in &result.layers {
            assert!(layer.threshold <= prev_threshold);
            assert!(layer.lower_group.iter().all(|i| prev_group.contains(i)));
            let mut reunion = layer.lower_group.clone();
            reunion.extend(&layer.upper_group);
            reunion.sort_unstable();
            let mut prev_sorted = prev_group.clone();
            prev_sorted.sort_unstable();
            assert_eq!(reunion, prev_sorted);
            prev_threshold = layer.threshold;
            prev_group = layer.lower_group.clone();
        }
    }

    #[test]
    fn degenerate_zero_residuals_converge_at_zero() {
        let result = multilayer_threshold(&[0.0; 5], 200, 2).unwrap();
        assert_eq!(result.threshold, 0.0);
        assert_eq!(result.lower_group.len(), 5);
        assert!(result.upper_group.is_empty());
    }

    proptest::proptest! {
        #[test]
        fn scale_equivariance(
            raw in proptest::collection::vec(0.001_f64..10.0, 3..200),
            scale in 0.1_f64..50.0,
        ) {
            let base = multilayer_threshold(&raw, 200, 2).unwrap();
            let scaled_input: Vec<f64> = raw.iter().map(|r| r * scale).collect();
            let scaled = multilayer_threshold(&scaled_input, 200, 2).unwrap();
            proptest::prop_assert_eq!(&base.lower_group, &scaled.lower_group);
            proptest::prop_assert!(
                (scaled.threshold - base.threshold * scale).abs()
                    <= 1e-9 * base.threshold.max(1.0) * scale
            );
        }

        #[test]
        fn split_matches_brute_force_oracle(
            raw in proptest::collection::vec(0.0_f64..5.0, 2..400),
            interval_count in 2_usize..300,
        ) {
            if let Some(hist) = build_histogram(&raw, interval_count).unwrap() {
                let split = otsu_threshold(&hist, interval_count, raw.len()).unwrap();
                let oracle = brute_force_otsu(hist.counts(), interval_count, raw.len());
                proptest::prop_assert_eq!(split.map(|s| s.split_index), oracle);
            }
        }
    }
}
