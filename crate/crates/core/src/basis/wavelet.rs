//! Daubechies scaling functions on a dyadic grid and their periodization on [0, 1].
//!
//! Integer-point values of the scaling function come from the eigenvector of the
//! two-scale operator; finer dyadic points are then filled level by level from
//! the refinement equation `phi(x) = sqrt(2) * sum_k h_k phi(2x - k)`. Values on
//! the grid are exact up to rounding, which keeps the partition of unity intact
//! at every grid node.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Smallest and largest supported wavelet order `N` (filter length `2N`).
pub const MIN_ORDER: usize = 2;
pub const MAX_ORDER: usize = 10;

// Low-pass reconstruction filters, normalized so that sum h_k = sqrt(2).
const DB2: [f64; 4] = [
    0.48296291314453416,
    0.8365163037378079,
    0.2241438680420134,
    -0.12940952255126037,
];

const DB3: [f64; 6] = [
    0.33267055295008263,
    0.8068915093110925,
    0.45987750211849154,
    -0.13501102001025458,
    -0.08544127388202666,
    0.03522629188570953,
];

const DB4: [f64; 8] = [
    0.2303778133088965,
    0.7148465705529157,
    0.6308807679298589,
    -0.027983769416859854,
    -0.18703481171909309,
    0.030841381835560764,
    0.0328830116668852,
    -0.010597401785069032,
];

const DB5: [f64; 10] = [
    0.16010239797419293,
    0.6038292697971896,
    0.7243085284377729,
    0.13842814590132074,
    -0.24229488706638203,
    -0.032244869584638375,
    0.07757149384004572,
    -0.006241490212798274,
    -0.012580751999081999,
    0.0033357252854737712,
];

const DB6: [f64; 12] = [
    0.11154074335010947,
    0.49462389039845306,
    0.7511339080210954,
    0.31525035170919763,
    -0.22626469396543983,
    -0.12976686756726194,
    0.09750160558732304,
    0.027522865530305727,
    -0.03158203931748603,
    0.0005538422011614961,
    0.004777257510945511,
    -0.0010773010853084796,
];

const DB7: [f64; 14] = [
    0.07785205408500918,
    0.3965393194819173,
    0.7291320908462351,
    0.4697822874051931,
    -0.14390600392856498,
    -0.22403618499387498,
    0.07130921926683026,
    0.08061260915108308,
    -0.03802993693501441,
    -0.01657454163066688,
    0.01255099855609984,
    0.0004295779729213665,
    -0.0018016407040474908,
    0.00035371379997452024,
];

const DB8: [f64; 16] = [
    0.05441584224310401,
    0.31287159091429995,
    0.6756307362972898,
    0.5853546836542067,
    -0.015829105256349306,
    -0.2840155429615469,
    0.0004724845739132828,
    0.12874742662047847,
    -0.017369301001807547,
    -0.044088253930794755,
    0.013981027917398282,
    0.008746094047405777,
    -0.004870352993451574,
    -0.00039174037337694705,
    0.0006754494064505693,
    -0.00011747678412476953,
];

const DB9: [f64; 18] = [
    0.038077947363878345,
    0.24383467461259034,
    0.6048231236901112,
    0.6572880780513005,
    0.13319738582500756,
    -0.2932737832791749,
    -0.09684078322297646,
    0.14854074933810638,
    0.03072568147933338,
    -0.06763282906132997,
    0.00025094711483145197,
    0.022361662123679096,
    -0.004723204757751397,
    -0.00428150368246343,
    0.0018476468830562265,
    0.00023038576352319597,
    -0.0002519631889427101,
    3.93473203162716e-05,
];

const DB10: [f64; 20] = [
    0.026670057900555554,
    0.1881768000776915,
    0.5272011889317256,
    0.6884590394536035,
    0.2811723436605775,
    -0.24984642432731538,
    -0.19594627437737705,
    0.12736934033579325,
    0.09305736460357235,
    -0.07139414716639708,
    -0.029457536821875813,
    0.033212674059341,
    0.0036065535669561697,
    -0.010733175483330575,
    0.001395351747052901,
    0.001992405295185056,
    -0.0006858566949597116,
    -0.00011646685512928545,
    9.358867032006959e-05,
    -1.3264202894521244e-05,
];

/// Low-pass filter coefficients of the Daubechies wavelet with `order` vanishing moments.
pub fn filter(order: usize) -> Result<&'static [f64]> {
    let h: &'static [f64] = match order {
        2 => &DB2,
        3 => &DB3,
        4 => &DB4,
        5 => &DB5,
        6 => &DB6,
        7 => &DB7,
        8 => &DB8,
        9 => &DB9,
        10 => &DB10,
        _ => {
            return Err(Error::invalid(format!(
                "Daubechies order must be in {MIN_ORDER}..={MAX_ORDER}, got {order}"
            )))
        }
    };
    Ok(h)
}

/// Scaling function sampled at `x = i / 2^levels` for `x` in `[0, 2N - 1]`.
#[derive(Debug, Clone)]
pub struct ScalingFunction {
    levels: usize,
    support: usize,
    values: Vec<f64>,
}

impl ScalingFunction {
    /// Runs the dyadic cascade for `levels` refinement steps.
    pub fn cascade(h: &[f64], levels: usize) -> Result<Self> {
        let taps = h.len();
        if taps < 4 || !taps.is_multiple_of(2) {
            return Err(Error::invalid("filter length must be even and at least 4"));
        }
        let support = taps - 1;
        let integers = integer_values(h)?;

        let scale = 1usize << levels;
        let len = support * scale + 1;
        let mut values = vec![0.0; len];
        for (k, v) in integers.iter().enumerate() {
            values[k * scale] = *v;
        }

        let sqrt2 = std::f64::consts::SQRT_2;
        for level in 1..=levels {
            let step = 1usize << (levels - level);
            // odd multiples of `step` are new at this level
            let mut i = step;
            while i < len {
                let mut acc = 0.0;
                for (k, hk) in h.iter().enumerate() {
                    let shift = k * scale;
                    let twice = 2 * i;
                    if twice >= shift {
                        let idx = twice - shift;
                        if idx < len {
                            acc += hk * values[idx];
                        }
                    }
                }
                values[i] = sqrt2 * acc;
                i += 2 * step;
            }
        }

        Ok(Self {
            levels,
            support,
            values,
        })
    }

    pub fn support(&self) -> usize {
        self.support
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Raw grid values; index `i` corresponds to `x = i / 2^levels`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at grid index `i`, zero outside the support.
    #[inline]
    pub fn at_index(&self, i: i64) -> f64 {
        if i < 0 {
            return 0.0;
        }
        self.values.get(i as usize).copied().unwrap_or(0.0)
    }
}

/// phi(0..=2N-1) from the eigenvector of `A[k][l] = sqrt(2) h[2k - l]` at eigenvalue one,
/// normalized to sum to one.
fn integer_values(h: &[f64]) -> Result<Vec<f64>> {
    let support = h.len() - 1;
    // phi(0) = phi(2N - 1) = 0 for Daubechies filters; solve for the interior points.
    let interior = support - 1;
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut a = DMatrix::<f64>::zeros(interior, interior);
    for r in 0..interior {
        let k = r + 1;
        for c in 0..interior {
            let l = c + 1;
            let idx = 2 * k as i64 - l as i64;
            if idx >= 0 && (idx as usize) < h.len() {
                a[(r, c)] = sqrt2 * h[idx as usize];
            }
        }
        a[(r, r)] -= 1.0;
    }
    // (A - I) is singular; swap the last equation for the normalization sum = 1.
    let mut rhs = DVector::<f64>::zeros(interior);
    for c in 0..interior {
        a[(interior - 1, c)] = 1.0;
    }
    rhs[interior - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("scaling-function eigenproblem is singular".into()))?;
    let mut out = vec![0.0; support + 1];
    for (i, v) in sol.iter().enumerate() {
        out[i + 1] = *v;
    }
    Ok(out)
}

/// Periodized scaling functions `phi_{J,k}` on `[0, 1]` tabulated on the grid `g / 2^L`.
///
/// Only `k = 0` is stored; the others are circular shifts by `k * 2^(L - J)` nodes.
#[derive(Debug, Clone)]
pub struct PeriodizedTable {
    level: usize,
    refinement: usize,
    base: Vec<f64>,
}

impl PeriodizedTable {
    pub fn new(order: usize, level: usize, refinement: usize) -> Result<Self> {
        if refinement < level {
            return Err(Error::invalid("refinement level must not be below the dyadic level"));
        }
        let h = filter(order)?;
        let phi = ScalingFunction::cascade(h, refinement - level)?;
        let grid = 1usize << refinement;
        let per_unit = 1i64 << (refinement - level);
        let period = (1i64 << level) * per_unit; // == grid, in phi-index units
        let amp = (2f64).powf(level as f64 / 2.0);
        let span = (phi.support() as i64) * per_unit;

        let mut base = vec![0.0; grid];
        for (g, slot) in base.iter_mut().enumerate() {
            // phi-grid index of 2^J t for t = g / 2^L
            let mut idx = g as i64;
            let mut acc = 0.0;
            while idx <= span {
                acc += phi.at_index(idx);
                idx += period;
            }
            *slot = amp * acc;
        }
        Ok(Self {
            level,
            refinement,
            base,
        })
    }

    pub fn count(&self) -> usize {
        1 << self.level
    }

    pub fn grid_len(&self) -> usize {
        self.base.len()
    }

    /// Grid value of `phi_{J,k}` at node `g` (taken modulo the period).
    #[inline]
    pub fn node(&self, k: usize, g: usize) -> f64 {
        let n = self.base.len();
        let shift = k << (self.refinement - self.level);
        self.base[(g + n - (shift % n)) % n]
    }

    /// Linear interpolation of all `2^J` functions at `t` in `[0, 1]`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let n = self.base.len();
        let pos = t * n as f64;
        let mut g = pos.floor() as usize;
        if g >= n {
            g = n - 1;
        }
        let frac = pos - g as f64;
        for (k, o) in out.iter_mut().enumerate().take(self.count()) {
            let lo = self.node(k, g);
            let hi = self.node(k, g + 1);
            *o = lo + frac * (hi - lo);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filters_satisfy_sum_and_orthogonality() {
        for order in MIN_ORDER..=MAX_ORDER {
            let h = filter(order).unwrap();
            let even: f64 = h.iter().step_by(2).sum();
            let odd: f64 = h.iter().skip(1).step_by(2).sum();
            assert!((even - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12, "db{order}");
            assert!((odd - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12, "db{order}");
            for shift in 0..order {
                let s: f64 = (2 * shift..h.len()).map(|k| h[k] * h[k - 2 * shift]).sum();
                let want = if shift == 0 { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-10, "db{order} shift {shift}: {s}");
            }
        }
    }

    #[test]
    fn unsupported_order_rejected() {
        assert!(filter(1).is_err());
        assert!(filter(11).is_err());
    }

    #[test]
    fn scaling_function_integrates_to_one_and_partitions_unity() {
        let phi = ScalingFunction::cascade(filter(4).unwrap(), 8).unwrap();
        let scale = 1usize << 8;
        let dx = 1.0 / scale as f64;
        let integral: f64 = phi.values().iter().sum::<f64>() * dx;
        assert!((integral - 1.0).abs() < 1e-10, "{integral}");
        for frac in [0usize, 17, 128, 201] {
            let s: f64 = (0..phi.support())
                .map(|m| phi.at_index((m * scale + frac) as i64))
                .sum();
            assert!((s - 1.0).abs() < 1e-10, "frac {frac}: {s}");
        }
    }

    #[test]
    fn db2_integer_values_match_closed_form() {
        // phi(1) = (1 + sqrt 3) / 2, phi(2) = (1 - sqrt 3) / 2
        let phi = ScalingFunction::cascade(filter(2).unwrap(), 0).unwrap();
        let s3 = 3f64.sqrt();
        assert!((phi.values()[1] - (1.0 + s3) / 2.0).abs() < 1e-12);
        assert!((phi.values()[2] - (1.0 - s3) / 2.0).abs() < 1e-12);
        assert_eq!(phi.values()[0], 0.0);
        assert_eq!(phi.values()[3], 0.0);
    }
}
