//! Constant-velocity Kalman filter over `(cx, cy, aspect, height)`.
//!
//! The state is the four box parameters followed by their per-frame
//! velocities. Noise standard deviations scale with the current box height so
//! large and small instruments behave alike.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, CameraTransform};

pub type StateVector = SVector<f64, 8>;
pub type StateCovariance = SMatrix<f64, 8, 8>;
pub type Measurement = SVector<f64, 4>;
pub type MeasurementCovariance = SMatrix<f64, 4, 4>;

const MIN_EXTENT: f64 = 1e-6;
const CONFIDENCE_NOISE_FLOOR: f64 = 1e-4;

// Aspect is dimensionless, so its noise is not height-scaled.
const ASPECT_STD: f64 = 1e-2;
const ASPECT_VELOCITY_STD: f64 = 1e-5;
const ASPECT_MEASUREMENT_STD: f64 = 1e-1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KalmanState {
    pub mean: StateVector,
    pub covariance: StateCovariance,
}

impl KalmanState {
    pub fn to_box(&self) -> Result<BoundingBox> {
        let m = &self.mean;
        BoundingBox::from_xyah(m[0], m[1], m[2], m[3])
    }

    pub fn position(&self) -> Measurement {
        self.mean.fixed_rows::<4>(0).into_owned()
    }

    /// Smallest eigenvalue of the covariance.
    pub fn min_eigenvalue(&self) -> f64 {
        self.covariance
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Noise parameters. The scale factors multiply the whole process or
/// measurement covariance; setting one to zero gives the noiseless limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KalmanFilter {
    pub std_weight_position: f64,
    pub std_weight_velocity: f64,
    pub process_scale: f64,
    pub measurement_scale: f64,
}

impl Default for KalmanFilter {
    fn default() -> Self {
        Self {
            std_weight_position: 1.0 / 20.0,
            std_weight_velocity: 1.0 / 160.0,
            process_scale: 1.0,
            measurement_scale: 1.0,
        }
    }
}

fn transition() -> StateCovariance {
    let mut f = StateCovariance::identity();
    for i in 0..4 {
        f[(i, i + 4)] = 1.0;
    }
    f
}

fn observation() -> SMatrix<f64, 4, 8> {
    SMatrix::<f64, 4, 8>::identity()
}

fn check_finite_state(s: &KalmanState) -> Result<()> {
    if s.mean.iter().chain(s.covariance.iter()).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("kalman state"))
    }
}

impl KalmanFilter {
    pub fn initiate(&self, b: &BoundingBox) -> KalmanState {
        let [cx, cy, a, h] = b.to_xyah();
        let mut mean = StateVector::zeros();
        mean[0] = cx;
        mean[1] = cy;
        mean[2] = a;
        mean[3] = h;
        let p = 2.0 * self.std_weight_position * h;
        let v = 10.0 * self.std_weight_velocity * h;
        let std = [p, p, ASPECT_STD, p, v, v, ASPECT_VELOCITY_STD, v];
        let covariance = StateCovariance::from_diagonal(&SVector::from(std.map(|s| s * s)));
        KalmanState { mean, covariance }
    }

    fn process_noise(&self, h: f64) -> StateCovariance {
        let p = self.std_weight_position * h;
        let v = self.std_weight_velocity * h;
        let std = [p, p, ASPECT_STD, p, v, v, ASPECT_VELOCITY_STD, v];
        StateCovariance::from_diagonal(&SVector::from(std.map(|s| s * s * self.process_scale)))
    }

    /// Nominal measurement noise for a box of height `h`.
    pub fn measurement_noise(&self, h: f64) -> MeasurementCovariance {
        let p = self.std_weight_position * h;
        let std = [p, p, ASPECT_MEASUREMENT_STD, p];
        MeasurementCovariance::from_diagonal(&SVector::from(
            std.map(|s| s * s * self.measurement_scale),
        ))
    }

    /// One constant-velocity step. When a camera transform is given, the
    /// state is first carried into the new camera frame: centre through the
    /// full affine map, planar velocity through its linear part, and height
    /// (with its velocity) through the isotropic scale.
    pub fn predict(
        &self,
        state: &KalmanState,
        transform: Option<&CameraTransform>,
    ) -> Result<KalmanState> {
        check_finite_state(state)?;
        let mut mean = state.mean;
        let mut cov = state.covariance;

        if let Some(t) = transform.filter(|t| !t.is_identity()) {
            let m = t.rotation_scale();
            let s = t.scale();
            let mut j = StateCovariance::identity();
            for offset in [0usize, 4] {
                for r in 0..2 {
                    for c in 0..2 {
                        j[(offset + r, offset + c)] = m[r][c];
                    }
                }
            }
            j[(3, 3)] = s;
            j[(7, 7)] = s;
            let [tx, ty] = t.translation_vector();
            mean = j * mean;
            mean[0] += tx;
            mean[1] += ty;
            cov = j * cov * j.transpose();
        }

        let h = mean[3];
        let f = transition();
        mean = f * mean;
        cov = f * cov * f.transpose() + self.process_noise(h);
        cov = (cov + cov.transpose()) * 0.5;
        mean[2] = mean[2].max(MIN_EXTENT);
        mean[3] = mean[3].max(MIN_EXTENT);
        Ok(KalmanState {
            mean,
            covariance: cov,
        })
    }

    /// Measurement update from a detected box. With `confidence` given the
    /// measurement noise is scaled by `1 - confidence`, floored at 1e-4 of
    /// the nominal value.
    pub fn update(
        &self,
        state: &KalmanState,
        b: &BoundingBox,
        confidence: Option<f64>,
    ) -> Result<KalmanState> {
        let mut r = self.measurement_noise(state.mean[3]);
        if let Some(c) = confidence {
            if !c.is_finite() {
                return Err(Error::NonFinite("detection confidence"));
            }
            r *= (1.0 - c).max(CONFIDENCE_NOISE_FLOOR);
        }
        self.update_with_noise(state, &Measurement::from(b.to_xyah()), &r)
    }

    /// Linear update with an explicit measurement covariance. Uses the Joseph
    /// form so the posterior stays symmetric positive semidefinite.
    pub fn update_with_noise(
        &self,
        state: &KalmanState,
        z: &Measurement,
        r: &MeasurementCovariance,
    ) -> Result<KalmanState> {
        check_finite_state(state)?;
        if !z.iter().chain(r.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("measurement"));
        }
        let h = observation();
        let p = &state.covariance;
        let s = h * p * h.transpose() + r;
        let pht = p * h.transpose();
        // K = P H^T S^-1, solved as S K^T = H P
        let kt = match s.cholesky() {
            Some(ch) => ch.solve(&pht.transpose()),
            None => {
                let inv = s
                    .try_inverse()
                    .ok_or(Error::NonFinite("innovation covariance"))?;
                inv * pht.transpose()
            }
        };
        let k = kt.transpose();
        let innovation = z - h * state.mean;
        let mean = state.mean + k * innovation;
        let i_kh = StateCovariance::identity() - k * h;
        let mut cov = i_kh * p * i_kh.transpose() + k * r * k.transpose();
        cov = (cov + cov.transpose()) * 0.5;
        let out = KalmanState {
            mean,
            covariance: cov,
        };
        check_finite_state(&out)?;
        Ok(out)
    }

    /// Squared Mahalanobis distance between the predicted centre and the
    /// measured box centre, including nominal measurement noise.
    pub fn position_gating_distance(&self, state: &KalmanState, b: &BoundingBox) -> f64 {
        let (cx, cy) = b.center();
        let r = self.measurement_noise(state.mean[3]);
        let s = state.covariance.fixed_view::<2, 2>(0, 0).into_owned()
            + r.fixed_view::<2, 2>(0, 0);
        let d = SVector::<f64, 2>::new(cx - state.mean[0], cy - state.mean[1]);
        match s.cholesky() {
            Some(ch) => d.dot(&ch.solve(&d)),
            None if d.norm() == 0.0 => 0.0,
            None => f64::INFINITY,
        }
    }
}
