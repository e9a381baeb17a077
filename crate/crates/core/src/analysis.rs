//! Rank diagnostics for realized layers.
//!
//! The lumped matrices `A = [A_kl]`, `B = [B_k]`, `C = [C_k ...]` of a
//! two-direction realization admit a finite-window minimality test: with
//! `r = r_1 + r_2`, the product of the r-step observability and
//! reachability matrices has rank `c_in (r_1 + r_2)` exactly when the
//! realization cannot be shrunk, provided the corner tap `K[r_1, r_2]`
//! has full column rank and the layer is square (`c_in = c_out`). The
//! same lumped matrices drive 1-D Kalman tests and a general lower bound
//! on achievable state dimension.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::fixtures::{random_signal, SplitMix64};
use crate::realization::{LayerRealization, Realization};
use crate::simulator::{apply_realization, impulse_response, realize_layer};
use crate::tensor::{convolve, dilate_kernel, max_abs_diff, ConvConfig, Kernel, MultiIndex, Padding};
use crate::{Error, Result};

/// Count of singular values above `max(m, n) * sigma_max * eps`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let svd = m.clone().svd(false, false);
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
    if sigma_max == 0.0 {
        return 0;
    }
    let tau = m.nrows().max(m.ncols()) as f64 * sigma_max * f64::EPSILON;
    svd.singular_values.iter().filter(|&&s| s > tau).count()
}

/// Smallest singular value (0 for an empty matrix).
fn sigma_min(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let svd = m.clone().svd(false, false);
    svd.singular_values.iter().fold(f64::INFINITY, |a, &s| a.min(s))
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
}

/// Result of the two-direction minimality test.
///
/// `applicable` is false when the preconditions (square layer, corner tap
/// of full column rank) do not hold; the remaining fields are still filled
/// in for reporting. `holds` compares `rank` against `required`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankCertificate {
    pub applicable: bool,
    pub rank: usize,
    pub required: usize,
    pub holds: bool,
    pub leading_tap_sigma_min: f64,
    pub leading_tap_residual: f64,
    pub tail_residual: f64,
}

/// Builds the r-step observability/reachability product for a realized
/// two-direction kernel and checks its rank against the known minimal
/// state dimension.
///
/// Also reports how faithfully the lumped matrices reproduce the corner
/// tap (`C A^{r-1} B` against `K[r_1, r_2]`) and how quickly the powers
/// die off past the window (`C A^k B` for `k = r .. r + 2`), both of
/// which are exactly zero-residual for the shift-register construction.
pub fn minimality_certificate(real: &Realization, kernel: &Kernel) -> Result<RankCertificate> {
    if real.dim() != 2 || kernel.dim() != 2 {
        return Err(Error::Unsupported(
            "minimality certificate covers two-direction realizations only".into(),
        ));
    }
    if kernel.c_in() != real.input_dim() || kernel.c_out() != real.output_dim() {
        return Err(Error::DimMismatch(
            "kernel channel counts do not match the realization".into(),
        ));
    }
    let (r1, r2) = (kernel.extents()[0], kernel.extents()[1]);
    let r = r1 + r2;
    let c_in = kernel.c_in();

    let corner = DMatrix::from_fn(kernel.c_out(), c_in, |o, q| {
        kernel.coeff(kernel.extents().as_slice(), o, q)
    });
    let corner_sigma_min = sigma_min(&corner);
    let corner_full_rank = numerical_rank(&corner) == c_in;
    let applicable = kernel.c_in() == kernel.c_out() && corner_full_rank;

    let a = real.lumped_a();
    let b = real.lumped_b();
    let c = real.lumped_c();
    let n = a.nrows();

    if r == 0 {
        // Pointwise kernel: no state, nothing to certify.
        return Ok(RankCertificate {
            applicable,
            rank: 0,
            required: 0,
            holds: true,
            leading_tap_sigma_min: corner_sigma_min,
            leading_tap_residual: 0.0,
            tail_residual: 0.0,
        });
    }

    // Powers of A up to r + 2 (reused by every block below).
    let mut powers = Vec::with_capacity(r + 3);
    powers.push(DMatrix::identity(n, n));
    for k in 0..r + 2 {
        let next = &powers[k] * &a;
        powers.push(next);
    }

    let mut obs = DMatrix::zeros(r * c.nrows(), n);
    for k in 0..r {
        obs.rows_mut(k * c.nrows(), c.nrows()).copy_from(&(&c * &powers[k]));
    }
    let mut reach = DMatrix::zeros(n, r * b.ncols());
    for k in 0..r {
        reach
            .columns_mut(k * b.ncols(), b.ncols())
            .copy_from(&(&powers[r - 1 - k] * &b));
    }
    let product = &obs * &reach;

    let rank = numerical_rank(&product);
    let required = c_in * r;
    let leading_tap_residual = max_abs(&(&c * &powers[r - 1] * &b - &corner));
    let tail_residual = (r..r + 3)
        .map(|k| max_abs(&(&c * &powers[k] * &b)))
        .fold(0.0f64, f64::max);

    Ok(RankCertificate {
        applicable,
        rank,
        required,
        holds: rank >= required,
        leading_tap_sigma_min: corner_sigma_min,
        leading_tap_residual,
        tail_residual,
    })
}

/// Kalman-test outcome for a one-direction realization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub controllability_rank: usize,
    pub observability_rank: usize,
    pub controllable: bool,
    pub observable: bool,
    pub leading_tap_full_rank: bool,
}

fn kalman_ranks(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> (usize, usize) {
    let n = a.nrows();
    if n == 0 {
        return (0, 0);
    }
    let mut powers = Vec::with_capacity(n);
    powers.push(DMatrix::identity(n, n));
    for k in 0..n - 1 {
        let next = &powers[k] * a;
        powers.push(next);
    }
    let mut ctrb = DMatrix::zeros(n, n * b.ncols());
    let mut obsv = DMatrix::zeros(n * c.nrows(), n);
    for k in 0..n {
        ctrb.columns_mut(k * b.ncols(), b.ncols()).copy_from(&(&powers[k] * b));
        obsv.rows_mut(k * c.nrows(), c.nrows()).copy_from(&(c * &powers[k]));
    }
    (numerical_rank(&ctrb), numerical_rank(&obsv))
}

/// Runs the n-step Kalman tests on a one-direction realization. The
/// shift-register form is always controllable; it is observable exactly
/// when the last tap `K[r]` has full column rank.
pub fn observability_1d(real: &Realization, kernel: &Kernel) -> Result<ObservabilityReport> {
    if real.dim() != 1 || kernel.dim() != 1 {
        return Err(Error::Unsupported(
            "Kalman observability test covers one-direction realizations only".into(),
        ));
    }
    if kernel.c_in() != real.input_dim() || kernel.c_out() != real.output_dim() {
        return Err(Error::DimMismatch(
            "kernel channel counts do not match the realization".into(),
        ));
    }
    let n = real.total_state_dim();
    let (ctrb_rank, obsv_rank) = kalman_ranks(&real.lumped_a(), &real.lumped_b(), &real.lumped_c());
    let last = DMatrix::from_fn(kernel.c_out(), kernel.c_in(), |o, q| {
        kernel.coeff(kernel.extents().as_slice(), o, q)
    });
    Ok(ObservabilityReport {
        controllability_rank: ctrb_rank,
        observability_rank: obsv_rank,
        controllable: ctrb_rank == n,
        observable: obsv_rank == n,
        leading_tap_full_rank: numerical_rank(&last) == kernel.c_in(),
    })
}

/// State-dimension bookkeeping for a realized layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimReport {
    pub state_dims: Vec<usize>,
    pub total: usize,
    pub expected: Vec<usize>,
    pub matches: bool,
    pub input_dim: usize,
    pub output_dim: usize,
}

/// Closed-form state dimensions for the unit-stride builder applied to a
/// kernel with the given extents and channel counts.
pub fn expected_dims(extents: &MultiIndex, c_out: usize, c_in: usize) -> Vec<usize> {
    let d = extents.dim();
    if d == 1 {
        return vec![c_in * extents[0]];
    }
    let mut dims = Vec::with_capacity(d);
    dims.push(c_out * extents[0]);
    for k in 1..d {
        let tail: usize = (k + 1..d).map(|j| extents[j] + 1).product();
        dims.push(c_in * extents[k] * tail);
    }
    dims
}

/// Closed-form state dimensions for the two-direction strided builder.
pub fn expected_dims_strided(
    extents: &MultiIndex,
    stride: &MultiIndex,
    c_out: usize,
    c_in: usize,
) -> Vec<usize> {
    let (r1, r2) = (extents[0], extents[1]);
    let (s1, s2) = (stride[0], stride[1]);
    let l1 = (r1 + 1).div_ceil(s1) - 1;
    let l2 = r2 + 1 - s2;
    vec![c_out * l1, c_in * s1 * l2]
}

/// Compares a realized layer's state dimensions against the closed form
/// for its configuration.
pub fn dim_report(lr: &LayerRealization, kernel: &Kernel, config: &ConvConfig) -> Result<DimReport> {
    let eff = kernel.extents().mul(config.dilation());
    let (state_dims, input_dim, output_dim, expected) = match lr {
        LayerRealization::Plain(r) => (
            r.state_dims().to_vec(),
            r.input_dim(),
            r.output_dim(),
            expected_dims(&eff, kernel.c_out(), kernel.c_in()),
        ),
        LayerRealization::Strided(s) => (
            s.inner().state_dims().to_vec(),
            s.channels_in(),
            s.inner().output_dim(),
            expected_dims_strided(&eff, s.stride(), kernel.c_out(), kernel.c_in()),
        ),
    };
    let total = state_dims.iter().sum();
    let matches = state_dims == expected;
    Ok(DimReport { state_dims, total, expected, matches, input_dim, output_dim })
}

/// Everything the equivalence checker measures in one pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Largest pointwise gap between simulated and directly convolved
    /// outputs across all trials.
    pub max_abs_residual: f64,
    pub trials: usize,
    /// True when the impulse response reproduces every kernel tap and
    /// vanishes outside the kernel's support.
    pub kernel_recovered: bool,
    pub state_dims: Vec<usize>,
    pub total_state_dim: usize,
    /// Rank of the full observability/reachability product: no equivalent
    /// realization can have fewer lumped states than this.
    pub dim_lower_bound: usize,
    pub controllability_rank: usize,
    pub observability_rank: usize,
    /// Present for plain two-direction layers.
    pub rank_certificate: Option<RankCertificate>,
}

const RECOVERY_TOL: f64 = 1e-12;

fn check_plain_recovery(real: &Realization, k_eff: &Kernel) -> Result<bool> {
    let probe = k_eff.extents().add(&MultiIndex::ones(k_eff.dim()));
    let h = impulse_response(real, &probe)?;
    for t in probe.iter_box() {
        for o in 0..k_eff.c_out() {
            for q in 0..k_eff.c_in() {
                let want = if t.leq(k_eff.extents()) {
                    k_eff.coeff(t.as_slice(), o, q)
                } else {
                    0.0
                };
                if (h.coeff(t.as_slice(), o, q) - want).abs() > RECOVERY_TOL {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

fn check_strided_recovery(
    sr: &crate::realization::StridedRealization,
    k_eff: &Kernel,
) -> Result<bool> {
    let s = sr.stride();
    let c_in = k_eff.c_in();
    // Coarse extent large enough that s * probe + (s - 1) covers the kernel.
    let probe = k_eff.extents().floor_div(s).add(&MultiIndex::ones(2));
    let h = impulse_response(sr.inner(), &probe)?;
    for kappa in probe.iter_box() {
        for (blk, off) in sr.patch_order().iter().enumerate() {
            for o in 0..k_eff.c_out() {
                for q in 0..c_in {
                    // Block `blk` of the lumped input holds u at fine offset
                    // `off` inside the patch; after the s-1 front shift the
                    // fine tap it represents is s*kappa + (s-1) - off.
                    let fine: Vec<usize> = (0..2)
                        .map(|k| kappa[k] * s[k] + (s[k] - 1) - off[k])
                        .collect();
                    let want = if MultiIndex::new(fine.clone())?.leq(k_eff.extents()) {
                        k_eff.coeff(&fine, o, q)
                    } else {
                        0.0
                    };
                    let got = h.coeff(kappa.as_slice(), o, blk * c_in + q);
                    if (got - want).abs() > RECOVERY_TOL {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

/// Checks an already-built realization against direct convolution on
/// `trials` seeded random inputs of the given extent, recovers the kernel
/// from the impulse response, and attaches rank diagnostics. Deterministic
/// for a fixed seed. The configured stride must agree with the realization
/// (ones for the plain form).
pub fn verify_realization(
    lr: &LayerRealization,
    kernel: &Kernel,
    config: &ConvConfig,
    trials: usize,
    extent: &MultiIndex,
    seed: u64,
) -> Result<VerificationReport> {
    let lr_stride = match lr {
        LayerRealization::Plain(_) => MultiIndex::ones(kernel.dim()),
        LayerRealization::Strided(s) => s.stride().clone(),
    };
    if *config.stride() != lr_stride {
        return Err(Error::DimMismatch(format!(
            "configured stride {} does not match the realization's {}",
            config.stride(),
            lr_stride
        )));
    }
    let (lr_in, lr_out) = match lr {
        LayerRealization::Plain(r) => (r.input_dim(), r.output_dim()),
        LayerRealization::Strided(s) => (s.channels_in(), s.inner().output_dim()),
    };
    if lr_in != kernel.c_in() || lr_out != kernel.c_out() {
        return Err(Error::DimMismatch(format!(
            "realization maps {lr_in} -> {lr_out} channels, kernel is {} -> {}",
            kernel.c_in(),
            kernel.c_out()
        )));
    }
    let k_eff = dilate_kernel(kernel, config.dilation())?;

    // Residuals against the uncropped convolution (crop is a shared
    // postprocessing step; comparing before it exercises every output cell).
    let full_cfg = ConvConfig::unit(kernel.dim())
        .with_stride(config.stride().clone())?
        .with_dilation(config.dilation().clone())?
        .with_padding(Padding::Full);
    let mut rng = SplitMix64::new(seed);
    let mut max_abs_residual = 0.0f64;
    for _ in 0..trials {
        let u = random_signal(extent, kernel.c_in(), &mut rng)?;
        let simulated = apply_realization(lr, &u)?;
        let direct = convolve(kernel, &u, &full_cfg)?;
        max_abs_residual = max_abs_residual.max(max_abs_diff(&simulated, &direct)?);
    }

    let (kernel_recovered, inner) = match lr {
        LayerRealization::Plain(r) => (check_plain_recovery(r, &k_eff)?, r),
        LayerRealization::Strided(s) => (check_strided_recovery(s, &k_eff)?, s.inner()),
    };

    let n = inner.total_state_dim();
    let (controllability_rank, observability_rank) =
        kalman_ranks(&inner.lumped_a(), &inner.lumped_b(), &inner.lumped_c());
    let dim_lower_bound = if n == 0 {
        0
    } else {
        let a = inner.lumped_a();
        let b = inner.lumped_b();
        let c = inner.lumped_c();
        let mut powers = Vec::with_capacity(n);
        powers.push(DMatrix::identity(n, n));
        for k in 0..n - 1 {
            let next = &powers[k] * &a;
            powers.push(next);
        }
        let mut obsv = DMatrix::zeros(n * c.nrows(), n);
        let mut reach = DMatrix::zeros(n, n * b.ncols());
        for k in 0..n {
            obsv.rows_mut(k * c.nrows(), c.nrows()).copy_from(&(&c * &powers[k]));
            reach
                .columns_mut(k * b.ncols(), b.ncols())
                .copy_from(&(&powers[n - 1 - k] * &b));
        }
        numerical_rank(&(obsv * reach))
    };

    let rank_certificate = match lr {
        LayerRealization::Plain(r) if kernel.dim() == 2 => {
            Some(minimality_certificate(r, &k_eff)?)
        }
        _ => None,
    };

    Ok(VerificationReport {
        max_abs_residual,
        trials,
        kernel_recovered,
        state_dims: inner.state_dims().to_vec(),
        total_state_dim: n,
        dim_lower_bound,
        controllability_rank,
        observability_rank,
        rank_certificate,
    })
}

/// Realizes `kernel` under `config` and runs [`verify_realization`] on the
/// result.
pub fn verify_equivalence(
    kernel: &Kernel,
    config: &ConvConfig,
    trials: usize,
    extent: &MultiIndex,
    seed: u64,
) -> Result<VerificationReport> {
    let lr = realize_layer(kernel, config)?;
    verify_realization(&lr, kernel, config, trials, extent, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::random_kernel;
    use crate::realization::{build_1d, build_2d};

    fn mi(v: &[usize]) -> MultiIndex {
        MultiIndex::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rank_of_known_matrices() {
        assert_eq!(numerical_rank(&DMatrix::identity(4, 4)), 4);
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 5)), 0);
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0]);
        assert_eq!(numerical_rank(&m), 2);
        // Scale invariance of the relative threshold.
        assert_eq!(numerical_rank(&(m * 1e-18)), 2);
        assert_eq!(numerical_rank(&DMatrix::<f64>::zeros(0, 4)), 0);
    }

    /// Kernel whose corner tap is diagonally dominant, hence invertible.
    fn square_kernel_with_stiff_corner(
        extents: &MultiIndex,
        c: usize,
        rng: &mut SplitMix64,
    ) -> Kernel {
        let base = random_kernel(extents, c, c, rng).unwrap();
        Kernel::from_fn(extents.clone(), c, c, base.bias().to_vec(), |t, o, q| {
            let mut v = base.coeff(t, o, q);
            if t == extents.as_slice() && o == q {
                v += 3.0;
            }
            v
        })
        .unwrap()
    }

    #[test]
    fn certificate_confirms_full_rank_layers() {
        let mut rng = SplitMix64::new(80);
        for (r, c) in [([1, 1], 1), ([2, 2], 2), ([1, 3], 3), ([2, 1], 2)] {
            let extents = mi(&r);
            let kern = square_kernel_with_stiff_corner(&extents, c, &mut rng);
            let real = build_2d(&kern).unwrap();
            let cert = minimality_certificate(&real, &kern).unwrap();
            assert!(cert.applicable, "r={r:?} c={c}");
            assert!(cert.holds, "r={r:?} c={c} rank {} < {}", cert.rank, cert.required);
            assert_eq!(cert.required, c * (r[0] + r[1]));
            assert_eq!(cert.rank, real.total_state_dim());
            assert!(cert.leading_tap_residual <= 1e-12);
            assert!(cert.tail_residual <= 1e-12);
            assert!(cert.leading_tap_sigma_min > 0.0);
        }
    }

    #[test]
    fn certificate_marks_degenerate_corner_not_applicable() {
        let mut rng = SplitMix64::new(81);
        let extents = mi(&[1, 1]);
        let base = random_kernel(&extents, 2, 2, &mut rng).unwrap();
        let kern = Kernel::from_fn(extents.clone(), 2, 2, vec![0.0, 0.0], |t, o, q| {
            if t == [1, 1] {
                0.0
            } else {
                base.coeff(t, o, q)
            }
        })
        .unwrap();
        let real = build_2d(&kern).unwrap();
        let cert = minimality_certificate(&real, &kern).unwrap();
        assert!(!cert.applicable);
        assert_eq!(cert.leading_tap_sigma_min, 0.0);
        // The lumped products are still reported.
        assert_eq!(cert.required, 2 * 2);
    }

    #[test]
    fn rectangular_layers_are_not_applicable() {
        let mut rng = SplitMix64::new(82);
        let kern = random_kernel(&mi(&[1, 1]), 3, 2, &mut rng).unwrap();
        let real = build_2d(&kern).unwrap();
        let cert = minimality_certificate(&real, &kern).unwrap();
        assert!(!cert.applicable);
    }

    #[test]
    fn pointwise_kernel_certificate_is_trivial() {
        let mut rng = SplitMix64::new(83);
        let kern = square_kernel_with_stiff_corner(&mi(&[0, 0]), 2, &mut rng);
        let real = build_2d(&kern).unwrap();
        let cert = minimality_certificate(&real, &kern).unwrap();
        assert!(cert.applicable);
        assert!(cert.holds);
        assert_eq!(cert.rank, 0);
        assert_eq!(cert.required, 0);
        assert_eq!(cert.leading_tap_residual, 0.0);
    }

    #[test]
    fn one_direction_kalman_tests() {
        let mut rng = SplitMix64::new(84);
        // Full-rank last tap: controllable and observable.
        let kern = square_kernel_with_stiff_corner(&mi(&[3]), 2, &mut rng);
        let real = build_1d(&kern).unwrap();
        let rep = observability_1d(&real, &kern).unwrap();
        assert!(rep.controllable);
        assert!(rep.observable);
        assert!(rep.leading_tap_full_rank);
        assert_eq!(rep.controllability_rank, real.total_state_dim());

        // Wide layer (c_in > c_out): last tap cannot have full column
        // rank, and observability fails with it.
        let wide = random_kernel(&mi(&[2]), 1, 3, &mut rng).unwrap();
        let real_w = build_1d(&wide).unwrap();
        let rep_w = observability_1d(&real_w, &wide).unwrap();
        assert!(rep_w.controllable);
        assert!(!rep_w.observable);
        assert!(!rep_w.leading_tap_full_rank);
        assert!(rep_w.observability_rank < real_w.total_state_dim());
    }

    #[test]
    fn zero_kernel_residual_is_exact() {
        let kern = Kernel::new(mi(&[2, 2]), 1, 1, vec![0.0; 9], vec![0.0]).unwrap();
        let cfg = ConvConfig::unit(2);
        let rep = verify_equivalence(&kern, &cfg, 3, &mi(&[5, 5]), 7).unwrap();
        assert_eq!(rep.max_abs_residual, 0.0);
        assert!(rep.kernel_recovered);
    }

    #[test]
    fn verification_covers_each_layer_shape() {
        let mut rng = SplitMix64::new(85);

        let kern = square_kernel_with_stiff_corner(&mi(&[2, 2]), 2, &mut rng);
        let cfg = ConvConfig::unit(2);
        let rep = verify_equivalence(&kern, &cfg, 4, &mi(&[6, 6]), 11).unwrap();
        assert!(rep.max_abs_residual <= 1e-12);
        assert!(rep.kernel_recovered);
        assert_eq!(rep.total_state_dim, 2 * 2 + 2 * 2);
        let cert = rep.rank_certificate.expect("plain 2-D layers carry a certificate");
        assert!(cert.applicable && cert.holds);
        assert_eq!(rep.dim_lower_bound, 2 * (2 + 2));

        let cfg_s = ConvConfig::unit(2).with_stride(mi(&[2, 2])).unwrap();
        let rep_s = verify_equivalence(&kern, &cfg_s, 4, &mi(&[9, 9]), 12).unwrap();
        assert!(rep_s.max_abs_residual <= 1e-12);
        assert!(rep_s.kernel_recovered);
        assert!(rep_s.rank_certificate.is_none());

        let cfg_d = ConvConfig::unit(2).with_dilation(mi(&[2, 2])).unwrap();
        let rep_d = verify_equivalence(&kern, &cfg_d, 4, &mi(&[9, 9]), 13).unwrap();
        assert!(rep_d.max_abs_residual <= 1e-12);
        assert!(rep_d.kernel_recovered);
        let cert_d = rep_d.rank_certificate.expect("dilated plain layers carry one too");
        assert_eq!(cert_d.required, 2 * (4 + 4));

        let k3 = random_kernel(&mi(&[1, 1, 1]), 1, 2, &mut rng).unwrap();
        let rep3 = verify_equivalence(&k3, &ConvConfig::unit(3), 3, &mi(&[4, 4, 4]), 14).unwrap();
        assert!(rep3.max_abs_residual <= 1e-12);
        assert!(rep3.kernel_recovered);
        assert!(rep3.rank_certificate.is_none());

        let k1 = square_kernel_with_stiff_corner(&mi(&[2]), 2, &mut rng);
        let rep1 = verify_equivalence(&k1, &ConvConfig::unit(1), 3, &mi(&[10]), 15).unwrap();
        assert!(rep1.max_abs_residual <= 1e-12);
        assert!(rep1.kernel_recovered);
        assert_eq!(rep1.controllability_rank, 4);
        assert_eq!(rep1.observability_rank, 4);
    }

    #[test]
    fn corrupted_realization_fails_recovery() {
        let mut rng = SplitMix64::new(86);
        let kern = random_kernel(&mi(&[1, 1]), 1, 1, &mut rng).unwrap();
        let real = build_2d(&kern).unwrap();
        let mut d = real.d().clone();
        d[(0, 0)] += 0.5;
        let broken = Realization::new(
            real.state_dims().to_vec(),
            real.input_dim(),
            real.output_dim(),
            (0..2).map(|k| (0..2).map(|l| real.a(k, l).clone()).collect()).collect(),
            (0..2).map(|k| real.b(k).clone()).collect(),
            (0..2).map(|k| real.c(k).clone()).collect(),
            d,
            (0..2).map(|k| real.f(k).clone()).collect(),
            real.g().clone(),
        )
        .unwrap();
        assert!(!check_plain_recovery(&broken, &kern).unwrap());
    }

    #[test]
    fn expected_dimension_formulas() {
        assert_eq!(expected_dims(&mi(&[3]), 4, 2), vec![6]);
        assert_eq!(expected_dims(&mi(&[2, 2]), 1, 1), vec![2, 2]);
        assert_eq!(expected_dims(&mi(&[2, 1, 3, 2]), 2, 3), vec![4, 36, 27, 6]);
        assert_eq!(expected_dims_strided(&mi(&[4, 4]), &mi(&[2, 2]), 1, 1), vec![2, 6]);
        assert_eq!(expected_dims_strided(&mi(&[3, 5]), &mi(&[2, 3]), 3, 2), vec![3, 12]);
    }

    #[test]
    fn dim_report_matches_builders() {
        let mut rng = SplitMix64::new(87);
        let kern = random_kernel(&mi(&[2, 3]), 2, 3, &mut rng).unwrap();
        let cfg = ConvConfig::unit(2);
        let lr = realize_layer(&kern, &cfg).unwrap();
        let rep = dim_report(&lr, &kern, &cfg).unwrap();
        assert!(rep.matches, "got {:?} expected {:?}", rep.state_dims, rep.expected);
        assert_eq!(rep.total, 2 * 2 + 3 * 3);

        let cfg_s = ConvConfig::unit(2).with_stride(mi(&[2, 2])).unwrap();
        let lr_s = realize_layer(&kern, &cfg_s).unwrap();
        let rep_s = dim_report(&lr_s, &kern, &cfg_s).unwrap();
        assert!(rep_s.matches, "got {:?} expected {:?}", rep_s.state_dims, rep_s.expected);

        let cfg_d = ConvConfig::unit(2).with_dilation(mi(&[3, 2])).unwrap();
        let lr_d = realize_layer(&kern, &cfg_d).unwrap();
        let rep_d = dim_report(&lr_d, &kern, &cfg_d).unwrap();
        assert!(rep_d.matches);
    }

    #[test]
    fn reports_round_trip_through_json() {
        let mut rng = SplitMix64::new(88);
        let kern = square_kernel_with_stiff_corner(&mi(&[1, 1]), 2, &mut rng);
        let rep = verify_equivalence(&kern, &ConvConfig::unit(2), 2, &mi(&[4, 4]), 3).unwrap();
        let text = serde_json::to_string(&rep).unwrap();
        let back: VerificationReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.total_state_dim, rep.total_state_dim);
        assert_eq!(back.kernel_recovered, rep.kernel_recovered);
        assert_eq!(
            back.rank_certificate.unwrap().rank,
            rep.rank_certificate.unwrap().rank
        );
    }
}
