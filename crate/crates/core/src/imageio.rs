//! Grayscale PGM input/output and pixel-domain image recovery.

use serde::{Deserialize, Serialize};

use crate::ensembles::{generate, Ensemble};
use crate::error::{Error, Result};
use crate::experiments::mse;
use crate::linalg::matvec;
use crate::rng::SplitMix64;
use crate::solver::{basis_pursuit, SolveStatus, SolverConfig, SolverResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    maxval: u8,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, maxval: u8, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimension(format!("image is {width}x{height}")));
        }
        if maxval == 0 {
            return Err(Error::InvalidInput("maxval must be >= 1".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: pixels.len(),
            });
        }
        if let Some(p) = pixels.iter().find(|&&p| p > maxval) {
            return Err(Error::InvalidInput(format!("pixel {p} exceeds maxval {maxval}")));
        }
        Ok(GrayImage {
            width,
            height,
            maxval,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn maxval(&self) -> u8 {
        self.maxval
    }

    /// Row-major.
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn to_vector(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64).collect()
    }

    /// Rounds and clamps each value into `[0, maxval]`.
    pub fn from_vector(width: usize, height: usize, maxval: u8, values: &[f64]) -> Result<Self> {
        let pixels = values
            .iter()
            .map(|v| if v.is_nan() { 0 } else { v.round().clamp(0.0, maxval as f64) as u8 })
            .collect();
        GrayImage::new(width, height, maxval, pixels)
    }

    pub fn nonzeros(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0).count()
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset: self.pos,
            msg: msg.into(),
        })
    }

    /// Skips whitespace, and `#` comments when `comments` is set.
    fn skip_space(&mut self, comments: bool) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if comments && b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n' && c != b'\r') {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, comments: bool, what: &str) -> Result<u64> {
        self.skip_space(comments);
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return match self.bytes.get(self.pos) {
                None => self.err(format!("unexpected end of data reading {what}")),
                Some(_) => self.err(format!("expected {what}")),
            };
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ASCII digits");
        text.parse().or_else(|_| {
            self.pos = start;
            self.err(format!("{what} out of range"))
        })
    }
}

/// Parses an ASCII (`P2`) or binary (`P5`) PGM with `maxval <= 255`.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut c = Cursor { bytes, pos: 0 };
    let binary = match bytes.get(..2) {
        Some(b"P2") => false,
        Some(b"P5") => true,
        _ => return c.err("bad magic, expected P2 or P5"),
    };
    c.pos = 2;
    if !bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return c.err("expected whitespace after magic");
    }
    let width = c.number(true, "width")? as usize;
    let height = c.number(true, "height")? as usize;
    let maxval_pos = c.pos;
    let maxval = c.number(true, "maxval")?;
    if width == 0 || height == 0 {
        return c.err(format!("image is {width}x{height}"));
    }
    if maxval == 0 || maxval > 255 {
        c.pos = maxval_pos;
        return c.err(format!("maxval {maxval} outside 1..=255"));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::Parse {
            offset: c.pos,
            msg: "image too large".into(),
        })?;
    let mut pixels = Vec::with_capacity(count.min(bytes.len()));
    if binary {
        // exactly one whitespace byte separates the header from the raster
        if !bytes.get(c.pos).is_some_and(u8::is_ascii_whitespace) {
            return c.err("expected whitespace before raster");
        }
        c.pos += 1;
        let raster = &bytes[c.pos..];
        if raster.len() < count {
            c.pos = bytes.len();
            return c.err(format!("truncated raster: {} of {count} bytes", raster.len()));
        }
        for (i, &p) in raster[..count].iter().enumerate() {
            if p as u64 > maxval {
                c.pos += i;
                return c.err(format!("pixel {p} exceeds maxval {maxval}"));
            }
            pixels.push(p);
        }
    } else {
        for _ in 0..count {
            c.skip_space(false);
            let at = c.pos;
            let p = c.number(false, "pixel")?;
            if p > maxval {
                c.pos = at;
                return c.err(format!("pixel {p} exceeds maxval {maxval}"));
            }
            pixels.push(p as u8);
        }
        c.skip_space(false);
        if c.pos < bytes.len() {
            return c.err("trailing data after raster");
        }
    }
    GrayImage::new(width, height, maxval as u8, pixels)
}

/// Canonical PGM: `magic\nwidth height\nmaxval\n` followed by the raster;
/// the ASCII raster has one image row per line.
pub fn write_pgm(img: &GrayImage, binary: bool) -> Vec<u8> {
    let magic = if binary { "P5" } else { "P2" };
    let mut out = format!("{magic}\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    if binary {
        out.extend_from_slice(&img.pixels);
    } else {
        for row in img.pixels.chunks(img.width) {
            let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    }
    out
}

/// Keeps the `k` largest-magnitude pixels of the row-major vector (ties go
/// to the lower index). The support is sorted ascending.
pub fn sparsify(img: &GrayImage, k: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    let values = img.to_vector();
    if k > values.len() {
        return Err(Error::InvalidInput(format!("k = {k} exceeds pixel count {}", values.len())));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    let mut support = order[..k].to_vec();
    support.sort_unstable();
    let mut kept = vec![0.0; values.len()];
    for &j in &support {
        kept[j] = values[j];
    }
    Ok((kept, support))
}

/// Seed of the committed fixture images.
pub const FIXTURE_SEED: u64 = 1;

/// Deterministic `width x height` image with exactly `k` nonzero pixels at
/// uniformly chosen positions, intensities uniform in `1..=255`.
pub fn synthetic_sparse_image(width: usize, height: usize, k: usize, seed: u64) -> Result<GrayImage> {
    let len = width * height;
    if k > len {
        return Err(Error::InvalidInput(format!("k = {k} exceeds pixel count {len}")));
    }
    let mut rng = SplitMix64::new(seed);
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..k {
        let j = i + rng.next_below((len - i) as u64) as usize;
        idx.swap(i, j);
    }
    let mut support = idx[..k].to_vec();
    support.sort_unstable();
    let mut pixels = vec![0u8; len];
    for j in support {
        pixels[j] = 1 + rng.next_below(255) as u8;
    }
    GrayImage::new(width, height, 255, pixels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecoveryReport {
    pub ensemble: Ensemble,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub seed: u64,
    /// Frobenius ratio of the raw reconstruction against the original.
    pub mse: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub residual_norm: f64,
}

#[derive(Debug, Clone)]
pub struct ImageRecovery {
    pub image: GrayImage,
    /// Unclamped reconstruction, row-major.
    pub raw: Vec<f64>,
    pub report: ImageRecoveryReport,
}

/// Measures the row-major pixel vector with an `n x N` matrix of the given
/// ensemble and recovers it by basis pursuit.
pub fn image_recover(
    img: &GrayImage,
    n: usize,
    ensemble: Ensemble,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<ImageRecovery> {
    let big_n = img.len();
    if n == 0 || n > big_n {
        return Err(Error::InvalidDimension(format!("n = {n} must be in 1..={big_n}")));
    }
    let phi = generate(ensemble, n, big_n, seed)?;
    let m = img.to_vector();
    let y = matvec(&phi, &m, false)?;
    let r: SolverResult = basis_pursuit(&phi, &y, cfg)?;
    if r.status == SolveStatus::InfeasibleDetected {
        return Err(Error::SolverFailed {
            status: "infeasible-detected".into(),
            iterations: r.iterations,
            residual_norm: r.residual_norm,
        });
    }
    let mse_value = mse(&r.solution, &m)?;
    let image = GrayImage::from_vector(img.width, img.height, img.maxval, &r.solution)?;
    Ok(ImageRecovery {
        image,
        report: ImageRecoveryReport {
            ensemble,
            n,
            big_n,
            seed,
            mse: mse_value,
            status: r.status,
            iterations: r.iterations,
            residual_norm: r.residual_norm,
        },
        raw: r.solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_ascii() {
        let img = read_pgm(b"P2\n1 1\n255\n0\n").unwrap();
        assert_eq!((img.width(), img.height(), img.pixels()), (1, 1, &[0u8][..]));
        assert_eq!(write_pgm(&img, false), b"P2\n1 1\n255\n0\n");
    }

    #[test]
    fn header_comments_and_encodings_agree() {
        let ascii = b"P2 # comment\n# another\n3 2\n# max\n200\n0 10 200\n 7 8\n9\n";
        let a = read_pgm(ascii).unwrap();
        assert_eq!(a.pixels(), &[0, 10, 200, 7, 8, 9]);
        let mut bin = b"P5\n3 2 # c\n200\n".to_vec();
        bin.extend_from_slice(&[0, 10, 200, 7, 8, 9]);
        assert_eq!(read_pgm(&bin).unwrap(), a);
    }

    #[test]
    fn parse_errors_carry_offsets() {
        let e = read_pgm(b"P3\n1 1\n255\n0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { offset: 0, .. }));
        let mut truncated = b"P5\n4 4\n255\n".to_vec();
        truncated.extend_from_slice(&[1, 2, 3]);
        assert!(matches!(read_pgm(&truncated), Err(Error::Parse { offset: 14, .. })));
        let e = read_pgm(b"P2\n2 1\n100\n5 101\n").unwrap_err();
        assert!(matches!(e, Error::Parse { offset: 13, .. }), "{e}");
        assert!(read_pgm(b"P2\n2 1\n255\n5\n").is_err());
        assert!(read_pgm(b"P2\n1 1\n256\n0\n").is_err());
        assert!(read_pgm(b"P2\n1 1\n255\n0 9\n").is_err());
        assert!(read_pgm(b"P2\n0 1\n255\n").is_err());
    }

    #[test]
    fn sparsify_examples() {
        let img = GrayImage::new(2, 2, 255, vec![5, 9, 5, 0]).unwrap();
        let (v, s) = sparsify(&img, 2).unwrap();
        assert_eq!(v, vec![5.0, 9.0, 0.0, 0.0]);
        assert_eq!(s, vec![0, 1]);
        assert_eq!(sparsify(&img, 4).unwrap().0, img.to_vector());
        assert_eq!(sparsify(&img, 0).unwrap().0, vec![0.0; 4]);
        assert!(sparsify(&img, 5).is_err());
        let fixture = synthetic_sparse_image(64, 64, 739, 1).unwrap();
        assert_eq!(fixture.nonzeros(), 739);
        assert_eq!(sparsify(&fixture, 739).unwrap().0, fixture.to_vector());
    }

    #[test]
    fn recover_small_images() {
        let img = synthetic_sparse_image(8, 8, 5, 3).unwrap();
        let cfg = SolverConfig::default();
        let r = image_recover(&img, 64, Ensemble::Gaussian, 4, &cfg).unwrap();
        assert!(r.report.mse <= 1e-6, "{}", r.report.mse);
        assert_eq!(r.image, img);
        let r = image_recover(&img, 40, Ensemble::PartialSymmetricBernoulli, 4, &cfg).unwrap();
        assert!(r.report.mse <= 1e-6, "{}", r.report.mse);
        let blank = GrayImage::new(4, 4, 255, vec![0; 16]).unwrap();
        assert!(matches!(
            image_recover(&blank, 8, Ensemble::Gaussian, 1, &cfg),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(image_recover(&img, 65, Ensemble::Gaussian, 1, &cfg).is_err());
    }

    #[test]
    fn from_vector_clamps() {
        let img = GrayImage::from_vector(3, 1, 255, &[-3.2, 254.6, 300.0]).unwrap();
        assert_eq!(img.pixels(), &[0, 255, 255]);
    }

    fn arb_image() -> impl Strategy<Value = GrayImage> {
        (1usize..9, 1usize..9).prop_flat_map(|(w, h)| {
            prop::collection::vec(any::<u8>(), w * h).prop_map(move |px| GrayImage::new(w, h, 255, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn roundtrip_both_encodings(img in arb_image()) {
            for binary in [false, true] {
                let bytes = write_pgm(&img, binary);
                let back = read_pgm(&bytes).unwrap();
                prop_assert_eq!(&back, &img);
                prop_assert_eq!(write_pgm(&back, binary), bytes);
            }
        }

        #[test]
        fn sparsify_keeps_largest(img in arb_image(), frac in 0.0f64..1.0) {
            let k = (frac * img.len() as f64) as usize;
            let (v, s) = sparsify(&img, k).unwrap();
            prop_assert_eq!(s.len(), k);
            let nnz = v.iter().filter(|x| **x != 0.0).count();
            prop_assert!(nnz <= img.nonzeros().min(k));
            let kept_min = s.iter().map(|&j| img.pixels()[j]).min().unwrap_or(255);
            for (j, &p) in img.pixels().iter().enumerate() {
                if !s.contains(&j) {
                    prop_assert!(p <= kept_min);
                }
            }
        }
    }
}
