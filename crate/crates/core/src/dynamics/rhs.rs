//! Spectral form of the auxiliary system.

use num_complex::Complex64;

use crate::model::ModelParams;
use crate::spectral::grid::Tables;
use crate::spectral::ops::{real_fields_from_spectra, real_spectra, riesz_in_place};
use crate::spectral::{fft, GridSpec, RealField};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `(w, s, phi)` held as spectra in FFT slot order.
#[derive(Clone, Debug)]
pub(crate) struct SpectralState {
    pub w: Vec<Complex64>,
    pub s: Vec<Vec<Complex64>>,
    pub phi: Option<Vec<Complex64>>,
}

impl SpectralState {
    fn buffers_mut(&mut self) -> impl Iterator<Item = &mut Vec<Complex64>> {
        std::iter::once(&mut self.w)
            .chain(self.s.iter_mut())
            .chain(self.phi.iter_mut())
    }

    fn buffers(&self) -> impl Iterator<Item = &Vec<Complex64>> {
        std::iter::once(&self.w)
            .chain(self.s.iter())
            .chain(self.phi.iter())
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, other: &SpectralState) {
        for (a, b) in self.buffers_mut().zip(other.buffers()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += c * y;
            }
        }
    }

    /// Multiplies every buffer slotwise by `factor`.
    pub fn scale_slots(&mut self, factor: &[f64]) {
        for buf in self.buffers_mut() {
            for (x, &f) in buf.iter_mut().zip(factor) {
                *x *= f;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for buf in self.buffers_mut() {
            for x in buf.iter_mut() {
                *x *= c;
            }
        }
    }

    /// Parseval sums `sum |z|^2` for `w`, `s` and `phi`.
    pub fn spectral_energies(&self) -> [f64; 3] {
        let sq = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        [
            sq(&self.w),
            self.s.iter().map(|c| sq(c)).sum(),
            self.phi.as_deref().map(sq).unwrap_or(0.0),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.buffers()
            .all(|b| b.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}

/// Time derivative of the state together with `max |s|` at the evaluation point.
pub(crate) struct RhsOutput {
    pub deriv: SpectralState,
    pub s_sup: f64,
}

fn mask(tables: &Tables, data: &mut [Complex64]) {
    for (z, &keep) in data.iter_mut().zip(&tables.keep) {
        if !keep {
            *z = Complex64::default();
        }
    }
}

/// `d/dt` of `(w, s, phi)`.
///
/// `dw = (2t^2)^-1 U(1/t) [2 s.grad y + (div s) y]` with `y = U*(1/t) w`,
/// `ds = t^-2 (s.grad) s + t^-gamma grad g`, `dphi = (2t^2)^-1 |s|^2 + t^-gamma g`.
/// All products are truncated to the two-thirds band.
pub(crate) fn rhs(grid: &GridSpec, params: &ModelParams, t: f64, st: &SpectralState) -> RhsOutput {
    let tables = grid.tables();
    let n = grid.dim;
    let len = grid.len();
    let inv_t2 = 1.0 / (t * t);
    let t_gamma = t.powf(-params.gamma);

    // y and its gradient in physical space
    let y_hat: Vec<Complex64> =
        st.w.iter()
            .zip(&tables.xi_sq)
            .map(|(z, &k2)| z * Complex64::from_polar(1.0, k2 / (2.0 * t)))
            .collect();
    let mut y = y_hat.clone();
    fft::inverse(grid, &mut y);
    let dy: Vec<Vec<Complex64>> = (0..n)
        .map(|j| {
            let mut buf: Vec<Complex64> = y_hat
                .iter()
                .zip(&tables.xi_odd[j])
                .map(|(z, &k)| I * k * z)
                .collect();
            fft::inverse(grid, &mut buf);
            buf
        })
        .collect();

    // s and all first derivatives, ds_phys[i * n + j] = d_i s_j
    let s_phys = real_fields_from_spectra(grid, st.s.clone());
    let deriv_spectra: Vec<Vec<Complex64>> = (0..n * n)
        .map(|ij| {
            let (i, j) = (ij / n, ij % n);
            st.s[j]
                .iter()
                .zip(&tables.xi_odd[i])
                .map(|(z, &k)| I * k * z)
                .collect()
        })
        .collect();
    let ds_phys = real_fields_from_spectra(grid, deriv_spectra);

    let mut adv_w = vec![Complex64::default(); len];
    let mut conv = vec![vec![0.0; len]; n];
    let mut rho = vec![0.0; len];
    let mut s2 = vec![0.0; len];
    let mut s_sup2 = 0.0f64;
    for x in 0..len {
        let mut div = 0.0;
        let mut sdy = Complex64::default();
        let mut len2 = 0.0;
        for i in 0..n {
            let si = s_phys[i].values()[x];
            div += ds_phys[i * n + i].values()[x];
            sdy += si * dy[i][x];
            len2 += si * si;
        }
        for (j, c) in conv.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..n {
                acc += s_phys[i].values()[x] * ds_phys[i * n + j].values()[x];
            }
            c[x] = acc;
        }
        adv_w[x] = 2.0 * sdy + div * y[x];
        rho[x] = y[x].norm_sqr();
        s2[x] = len2;
        s_sup2 = s_sup2.max(len2);
    }

    fft::forward(grid, &mut adv_w);
    let mut dw = adv_w;
    for (z, &k2) in dw.iter_mut().zip(&tables.xi_sq) {
        *z *= 0.5 * inv_t2 * Complex64::from_polar(1.0, -k2 / (2.0 * t));
    }
    mask(&tables, &mut dw);

    let mut reals: Vec<RealField> = conv
        .into_iter()
        .map(|c| RealField::from_vec(*grid, c))
        .collect();
    reals.push(RealField::from_vec(*grid, rho));
    reals.push(RealField::from_vec(*grid, s2));
    let refs: Vec<&RealField> = reals.iter().collect();
    let mut spectra = real_spectra(&refs);
    let s2_hat = spectra.pop().expect("|s|^2 spectrum");
    let mut g_hat = spectra.pop().expect("|y|^2 spectrum");
    mask(&tables, &mut g_hat);
    riesz_in_place(grid, &mut g_hat, params.mu);
    for z in g_hat.iter_mut() {
        *z *= params.lambda;
    }

    let ds: Vec<Vec<Complex64>> = spectra
        .into_iter()
        .enumerate()
        .map(|(j, mut c)| {
            for ((z, g), &k) in c.iter_mut().zip(&g_hat).zip(&tables.xi_odd[j]) {
                *z = inv_t2 * *z + t_gamma * I * k * g;
            }
            mask(&tables, &mut c);
            c
        })
        .collect();

    let dphi = st.phi.as_ref().map(|_| {
        let mut c: Vec<Complex64> = s2_hat
            .iter()
            .zip(&g_hat)
            .map(|(a, g)| 0.5 * inv_t2 * a + t_gamma * g)
            .collect();
        mask(&tables, &mut c);
        c
    });

    RhsOutput {
        deriv: SpectralState {
            w: dw,
            s: ds,
            phi: dphi,
        },
        s_sup: s_sup2.sqrt(),
    }
}
