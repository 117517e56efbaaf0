use super::MediaError;

/// A single row-major image plane.
///
/// Ingested samples are `u8`; metrics and networks work on `f32` samples in
/// `[0, 1]`. Conversion between the two is `v / 255` one way and
/// `round(clamp(v, 0, 1) * 255)` the other, so 8-bit data survives a round trip.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane<T = f32> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Plane<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self, MediaError> {
        if width == 0 || height == 0 {
            return Err(MediaError::Dimensions(format!(
                "empty plane {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(MediaError::Dimensions(format!(
                "plane {width}x{height} needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(width > 0 && height > 0, "empty plane");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "empty plane");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    /// Sample with edge replication for out-of-range coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> T {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn same_dims<U>(&self, other: &Plane<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Plane<U> {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copy out a `w`x`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self, MediaError> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(MediaError::Dimensions(format!(
                "crop {w}x{h}+{x0}+{y0} outside {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x0 + w]);
        }
        Ok(Self {
            width: w,
            height: h,
            data,
        })
    }
}

impl Plane<u8> {
    pub fn to_float(&self) -> Plane<f32> {
        self.map(|v| v as f32 / 255.0)
    }
}

impl Plane<f32> {
    pub fn to_u8(&self) -> Plane<u8> {
        self.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
    }

    /// Samples widened to `f64` and multiplied by `scale`.
    pub fn scaled_f64(&self, scale: f64) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64 * scale).collect()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// 2x2 box downsampling; odd trailing rows/columns are dropped.
    pub fn downsample2(&self) -> Plane<f32> {
        let w = (self.width / 2).max(1);
        let h = (self.height / 2).max(1);
        if self.width < 2 || self.height < 2 {
            return self.clone();
        }
        Plane::from_fn(w, h, |x, y| {
            let s = self.get(2 * x, 2 * y)
                + self.get(2 * x + 1, 2 * y)
                + self.get(2 * x, 2 * y + 1)
                + self.get(2 * x + 1, 2 * y + 1);
            s * 0.25
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_wrong_length() {
        assert!(Plane::new(3, 3, vec![0u8; 8]).is_err());
        assert!(Plane::<u8>::new(0, 3, vec![]).is_err());
    }

    #[test]
    fn crop_window() {
        let p = Plane::from_fn(4, 3, |x, y| (y * 4 + x) as u8);
        let c = p.crop(1, 1, 2, 2).unwrap();
        assert_eq!(c.data(), &[5, 6, 9, 10]);
        assert!(p.crop(3, 0, 2, 1).is_err());
    }

    #[test]
    fn downsample_means() {
        let p = Plane::new(2, 2, vec![0.0f32, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(p.downsample2().data(), &[0.5]);
    }

    proptest! {
        #[test]
        fn u8_float_round_trip(data in proptest::collection::vec(any::<u8>(), 16)) {
            let p = Plane::new(4, 4, data).unwrap();
            prop_assert_eq!(p.to_float().to_u8(), p);
        }
    }
}
