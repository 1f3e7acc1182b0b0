//! Synthesis bases: identity, DCT-II, and wavelet bases defined by a
//! low-pass filter. Wavelet matrices are built by running the inverse
//! periodic transform on each coordinate vector, so a basis column is
//! exactly the signal its coefficient would synthesize.

use crate::error::{Error, Result};
use crate::linalg::numerical_rank;
use crate::matrix::{DenseMatrix, Tolerance};

const FILTER_SUM_TOL: f64 = 1e-6;
const QMF_TOL: f64 = 1e-8;

/// Two-channel synthesis filter. `lowpass` is the synthesis low-pass
/// band; the high-pass band is derived from `dual_lowpass` (or from the
/// reversed low-pass for an orthogonal filter) by alternating signs.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilter {
    name: String,
    lowpass: Vec<f64>,
    dual_lowpass: Option<Vec<f64>>,
    /// Decomposition depth; `None` means full depth for the target size.
    levels: Option<usize>,
    orthogonal: bool,
}

impl WaveletFilter {
    pub fn orthogonal(name: &str, lowpass: Vec<f64>) -> Result<Self> {
        let f = WaveletFilter {
            name: name.to_string(),
            lowpass,
            dual_lowpass: None,
            levels: None,
            orthogonal: true,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn biorthogonal(
        name: &str,
        synthesis_lowpass: Vec<f64>,
        analysis_lowpass: Vec<f64>,
    ) -> Result<Self> {
        let f = WaveletFilter {
            name: name.to_string(),
            lowpass: synthesis_lowpass,
            dual_lowpass: Some(analysis_lowpass),
            levels: None,
            orthogonal: false,
        };
        f.validate()?;
        Ok(f)
    }

    /// Restricts the decomposition depth.
    pub fn with_levels(mut self, levels: usize) -> Self {
        self.levels = Some(levels);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn is_orthogonal(&self) -> bool {
        self.orthogonal
    }

    pub fn levels(&self) -> Option<usize> {
        self.levels
    }

    fn validate(&self) -> Result<()> {
        for taps in std::iter::once(&self.lowpass).chain(self.dual_lowpass.iter()) {
            if taps.len() < 2 {
                return Err(Error::BadFilter(format!(
                    "{}: a filter needs at least two taps",
                    self.name
                )));
            }
            if taps.iter().any(|v| !v.is_finite()) {
                return Err(Error::BadFilter(format!(
                    "{}: coefficients must be finite",
                    self.name
                )));
            }
            let sum: f64 = taps.iter().sum();
            if (sum - std::f64::consts::SQRT_2).abs() > FILTER_SUM_TOL {
                return Err(Error::BadFilter(format!(
                    "{}: low-pass taps sum to {sum:.9}, expected sqrt(2)",
                    self.name
                )));
            }
        }
        if self.orthogonal {
            // quadrature-mirror consistency: double shifts of the
            // low-pass band must be orthonormal
            let h = &self.lowpass;
            let max_shift = h.len() / 2;
            for t in 0..max_shift {
                let mut acc = 0.0;
                for n in 0..h.len() - 2 * t {
                    acc += h[n] * h[n + 2 * t];
                }
                let target = if t == 0 { 1.0 } else { 0.0 };
                if (acc - target).abs() > QMF_TOL {
                    return Err(Error::BadFilter(format!(
                        "{}: quadrature-mirror check failed at shift {t} (got {acc:.3e})",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Parses one coefficient per line; `#` starts a comment.
    pub fn parse_coefficients(text: &str) -> Result<Vec<f64>> {
        let mut taps = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| {
                Error::BadFilter(format!("line {}: cannot parse `{line}`", lineno + 1))
            })?;
            taps.push(v);
        }
        if taps.is_empty() {
            return Err(Error::BadFilter("no coefficients found".into()));
        }
        Ok(taps)
    }

    pub fn orthogonal_from_file(name: &str, path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        WaveletFilter::orthogonal(name, Self::parse_coefficients(&text)?)
    }

    pub fn biorthogonal_from_files(
        name: &str,
        synthesis_path: &std::path::Path,
        analysis_path: &std::path::Path,
    ) -> Result<Self> {
        let syn = std::fs::read_to_string(synthesis_path)
            .map_err(|e| Error::Io(format!("{}: {e}", synthesis_path.display())))?;
        let ana = std::fs::read_to_string(analysis_path)
            .map_err(|e| Error::Io(format!("{}: {e}", analysis_path.display())))?;
        WaveletFilter::biorthogonal(
            name,
            Self::parse_coefficients(&syn)?,
            Self::parse_coefficients(&ana)?,
        )
    }

    /// The two-tap Haar filter; `haar_basis` goes through this.
    pub fn haar() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        WaveletFilter::orthogonal("haar", vec![s, s]).expect("haar taps are valid")
    }

    pub fn symlet4() -> Self {
        let taps = Self::parse_coefficients(include_str!("../data/symlet4.txt"))
            .expect("shipped symlet4 coefficients parse");
        WaveletFilter::orthogonal("symlet4", taps).expect("shipped symlet4 taps are valid")
    }

    pub fn bior2_2() -> Self {
        let syn = Self::parse_coefficients(include_str!("../data/bior2_2_synthesis.txt"))
            .expect("shipped bior2.2 synthesis coefficients parse");
        let ana = Self::parse_coefficients(include_str!("../data/bior2_2_analysis.txt"))
            .expect("shipped bior2.2 analysis coefficients parse");
        WaveletFilter::biorthogonal("bior2.2", syn, ana).expect("shipped bior2.2 taps are valid")
    }

    /// Synthesis high-pass band: alternating signs on the analysis
    /// low-pass (or on the reversed low-pass when orthogonal).
    fn highpass(&self) -> Vec<f64> {
        let dec: Vec<f64> = match &self.dual_lowpass {
            Some(d) => d.clone(),
            None => self.lowpass.iter().rev().copied().collect(),
        };
        dec.iter()
            .enumerate()
            .map(|(n, &v)| if n % 2 == 0 { v } else { -v })
            .collect()
    }
}

pub fn identity_basis(m: usize) -> Result<DenseMatrix> {
    if m == 0 {
        return Err(Error::DimensionMismatch("size must be positive".into()));
    }
    Ok(DenseMatrix::identity(m))
}

/// Orthonormal DCT-II synthesis matrix: column j samples the j-th
/// cosine mode, so column 0 is the constant vector 1/sqrt(m).
pub fn dct_basis(m: usize) -> Result<DenseMatrix> {
    if m == 0 {
        return Err(Error::DimensionMismatch("size must be positive".into()));
    }
    let mf = m as f64;
    DenseMatrix::from_fn(m, m, |i, j| {
        let c = if j == 0 {
            (1.0 / mf).sqrt()
        } else {
            (2.0 / mf).sqrt()
        };
        c * (std::f64::consts::PI * (2.0 * i as f64 + 1.0) * j as f64 / (2.0 * mf)).cos()
    })
}

pub fn haar_basis(m: usize) -> Result<DenseMatrix> {
    wavelet_basis(&WaveletFilter::haar(), m)
}

/// Synthesis matrix of the periodic inverse wavelet transform: column j
/// is the signal synthesized from the j-th coordinate coefficient
/// vector. Coefficients are laid out scaling-first, then detail bands
/// coarse to fine. `m` must be a power of two; depth defaults to full.
pub fn wavelet_basis(filter: &WaveletFilter, m: usize) -> Result<DenseMatrix> {
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(m));
    }
    let full_depth = m.trailing_zeros() as usize;
    let levels = filter.levels.unwrap_or(full_depth);
    if levels == 0 || levels > full_depth {
        return Err(Error::BadFilter(format!(
            "{}: {levels} levels do not fit size {m}",
            filter.name
        )));
    }
    let h = filter.lowpass.clone();
    let g = filter.highpass();
    let mut cols = Vec::with_capacity(m);
    for j in 0..m {
        let mut coeffs = vec![0.0; m];
        coeffs[j] = 1.0;
        cols.push(inverse_transform(&coeffs, levels, &h, &g));
    }
    DenseMatrix::from_columns(&cols)
}

/// Multi-level periodic synthesis from the coarse-first coefficient
/// layout [a_L, d_L, d_{L-1}, ..., d_1].
fn inverse_transform(coeffs: &[f64], levels: usize, h: &[f64], g: &[f64]) -> Vec<f64> {
    let m = coeffs.len();
    let coarse_len = m >> levels;
    let mut approx = coeffs[..coarse_len].to_vec();
    let mut consumed = coarse_len;
    for level in (1..=levels).rev() {
        let p = m >> level;
        let detail = &coeffs[consumed..consumed + p];
        consumed += p;
        approx = synthesize_level(&approx, detail, h, g);
    }
    approx
}

/// One synthesis step: upsample both bands by two and apply the filter
/// pair with periodic wrap-around.
fn synthesize_level(approx: &[f64], detail: &[f64], h: &[f64], g: &[f64]) -> Vec<f64> {
    let p = approx.len();
    let out_len = 2 * p;
    let mut x = vec![0.0; out_len];
    for t in 0..p {
        let base = 2 * t;
        if approx[t] != 0.0 {
            for (n, &hv) in h.iter().enumerate() {
                x[(base + n) % out_len] += approx[t] * hv;
            }
        }
        if detail[t] != 0.0 {
            for (n, &gv) in g.iter().enumerate() {
                x[(base + n) % out_len] += detail[t] * gv;
            }
        }
    }
    x
}

/// Ordered, named collection of invertible bases sharing one dimension.
#[derive(Debug, Clone)]
pub struct BasisCatalog {
    entries: Vec<(String, DenseMatrix)>,
}

impl BasisCatalog {
    pub fn new(entries: Vec<(String, DenseMatrix)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::DimensionMismatch("catalog cannot be empty".into()));
        }
        let m = entries[0].1.rows();
        let tol = Tolerance::default();
        for (i, (name, basis)) in entries.iter().enumerate() {
            if basis.rows() != m || basis.cols() != m {
                return Err(Error::DimensionMismatch(format!(
                    "basis `{name}` is {}x{}, expected {m}x{m}",
                    basis.rows(),
                    basis.cols()
                )));
            }
            if entries[..i].iter().any(|(other, _)| other == name) {
                return Err(Error::DimensionMismatch(format!(
                    "duplicate basis name `{name}`"
                )));
            }
            if numerical_rank(basis, &tol)? < m {
                return Err(Error::RankDeficient(i));
            }
        }
        Ok(BasisCatalog { entries })
    }

    /// The five-entry catalog used by the ensemble experiments:
    /// identity, DCT, Haar, Symlet-4 and Biorthogonal-2.2.
    pub fn standard(m: usize) -> Result<Self> {
        BasisCatalog::new(vec![
            ("identity".to_string(), identity_basis(m)?),
            ("dct".to_string(), dct_basis(m)?),
            ("haar".to_string(), haar_basis(m)?),
            (
                "symlet4".to_string(),
                wavelet_basis(&WaveletFilter::symlet4(), m)?,
            ),
            (
                "bior2.2".to_string(),
                wavelet_basis(&WaveletFilter::bior2_2(), m)?,
            ),
        ])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.entries[0].1.rows()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.entries[i].0
    }

    pub fn basis(&self, i: usize) -> &DenseMatrix {
        &self.entries[i].1
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DenseMatrix)> {
        self.entries.iter().map(|(n, b)| (n.as_str(), b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dct_first_column_is_constant() {
        let d = dct_basis(8).unwrap();
        let expect = 1.0 / 8.0_f64.sqrt();
        for i in 0..8 {
            assert!((d.get(i, 0) - expect).abs() < 1e-15);
        }
        assert!(d.orthogonality_defect() < 1e-12);
    }

    #[test]
    fn haar_two_point_matrix() {
        let h = haar_basis(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((h.get(0, 0) - s).abs() < 1e-15);
        assert!((h.get(1, 0) - s).abs() < 1e-15);
        assert!((h.get(0, 1) - s).abs() < 1e-15);
        assert!((h.get(1, 1) + s).abs() < 1e-15);
    }

    #[test]
    fn haar_is_orthonormal_and_scaling_first() {
        let h = haar_basis(8).unwrap();
        assert!(h.orthogonality_defect() < 1e-12);
        // full depth: first column is the constant vector
        let c = 1.0 / 8.0_f64.sqrt();
        for i in 0..8 {
            assert!((h.get(i, 0) - c).abs() < 1e-12);
        }
    }

    #[test]
    fn wavelet_size_must_be_power_of_two() {
        assert_eq!(haar_basis(12).unwrap_err(), Error::NotPowerOfTwo(12));
    }

    #[test]
    fn symlet_basis_is_orthonormal() {
        let w = wavelet_basis(&WaveletFilter::symlet4(), 64).unwrap();
        assert!(w.orthogonality_defect() < 1e-8);
    }

    #[test]
    fn bior_basis_is_invertible_but_not_orthogonal() {
        let w = wavelet_basis(&WaveletFilter::bior2_2(), 64).unwrap();
        let tol = Tolerance::default();
        assert_eq!(numerical_rank(&w, &tol).unwrap(), 64);
        assert!(w.orthogonality_defect() > 0.1);
    }

    #[test]
    fn haar_file_matches_builtin_exactly() {
        let path = std::path::Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/data/haar.txt"));
        let from_file = WaveletFilter::orthogonal_from_file("haar", path).unwrap();
        let a = wavelet_basis(&from_file, 16).unwrap();
        let b = haar_basis(16).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn filter_validation_catches_bad_taps() {
        assert!(matches!(
            WaveletFilter::orthogonal("bad", vec![1.0, 1.0]),
            Err(Error::BadFilter(_))
        ));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // sums to sqrt(2) but violates the quadrature-mirror condition
        assert!(matches!(
            WaveletFilter::orthogonal("bad", vec![s * 0.5, s * 0.5, s * 0.5, s * 0.5]),
            Err(Error::BadFilter(_))
        ));
        assert!(WaveletFilter::orthogonal("haar", vec![s, s]).is_ok());
    }

    #[test]
    fn coefficient_parsing() {
        let taps = WaveletFilter::parse_coefficients(
            "# comment\n0.5 # trailing\n\n0.25\n-0.25\n",
        )
        .unwrap();
        assert_eq!(taps, vec![0.5, 0.25, -0.25]);
        assert!(WaveletFilter::parse_coefficients("abc\n").is_err());
        assert!(WaveletFilter::parse_coefficients("# only comments\n").is_err());
    }

    #[test]
    fn reduced_depth_keeps_more_scaling_columns() {
        let filter = WaveletFilter::haar().with_levels(1);
        let w = wavelet_basis(&filter, 4).unwrap();
        assert!(w.orthogonality_defect() < 1e-12);
        // depth 1: columns 0..2 are scaling translates of length-2 support
        assert!((w.get(0, 0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(w.get(2, 0), 0.0);
        assert_eq!(w.get(0, 1), 0.0);
    }

    #[test]
    fn standard_catalog_holds_five_entries() {
        let cat = BasisCatalog::standard(16).unwrap();
        assert_eq!(cat.len(), 5);
        assert_eq!(cat.position("bior2.2"), Some(4));
        assert_eq!(cat.dim(), 16);
        assert!(BasisCatalog::new(vec![
            ("a".into(), DenseMatrix::identity(2)),
            ("a".into(), DenseMatrix::identity(2)),
        ])
        .is_err());
    }
}
