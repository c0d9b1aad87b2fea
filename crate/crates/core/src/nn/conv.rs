use ndarray::Array2;

/// Geometry of a square-kernel 2-D convolution over a channels-last image
/// stored as an `(h·w) × c` matrix, row `y·w + x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_hw(&self) -> (usize, usize) {
        let o = |n: usize| (n + 2 * self.pad - self.kernel) / self.stride + 1;
        (o(self.h), o(self.w))
    }

    /// Columns of the unfolded patch matrix.
    pub fn patch_len(&self) -> usize {
        self.kernel * self.kernel * self.c
    }

    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let (ho, wo) = self.out_hw();
        for oy in 0..ho {
            for ox in 0..wo {
                let row = oy * wo + ox;
                for ky in 0..self.kernel {
                    let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                    if iy < 0 || iy >= self.h as isize {
                        continue;
                    }
                    for kx in 0..self.kernel {
                        let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                        if ix < 0 || ix >= self.w as isize {
                            continue;
                        }
                        let src = iy as usize * self.w + ix as usize;
                        f(row, (ky * self.kernel + kx) * self.c, src);
                    }
                }
            }
        }
    }
}

/// Unfolds every receptive field into one row; zero padding.
pub fn im2col(x: &Array2<f64>, g: &ConvGeom) -> Array2<f64> {
    assert_eq!(x.dim(), (g.h * g.w, g.c), "im2col input shape");
    let (ho, wo) = g.out_hw();
    let mut out = Array2::zeros((ho * wo, g.patch_len()));
    let c = g.c;
    g.for_each_tap(|row, col, src| {
        for ch in 0..c {
            out[[row, col + ch]] = x[[src, ch]];
        }
    });
    out
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the image.
pub fn col2im(cols: &Array2<f64>, g: &ConvGeom) -> Array2<f64> {
    let mut out = Array2::zeros((g.h * g.w, g.c));
    let c = g.c;
    g.for_each_tap(|row, col, src| {
        for ch in 0..c {
            out[[src, ch]] += cols[[row, col + ch]];
        }
    });
    out
}
