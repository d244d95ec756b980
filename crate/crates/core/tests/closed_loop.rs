//! A free-flying camera chasing four markers through the public API:
//! measured centroid, observer, base velocity law.

use nalgebra::{Rotation3, Vector2, Vector3};

use quadservo_core::features::{centroid_from_points, project_to_sphere, target_centroid, visual_error};
use quadservo_core::observer::{sto_estimate, sto_init, sto_step, ObserverGains};
use quadservo_core::scalar::{lit, to_f64};
use quadservo_core::servo::{base_reference_velocity, ServoGains};
use quadservo_core::Real;

struct Outcome {
    /// Final camera-to-target offset error, m.
    position_error: f64,
    /// Final velocity estimate error, m/s.
    estimate_error: f64,
}

fn markers<T: Real>() -> [Vector3<T>; 4] {
    let d: T = lit(0.1);
    let z = T::zero();
    [Vector3::new(d, z, z), Vector3::new(-d, z, z), Vector3::new(z, d, z), Vector3::new(z, -d, z)]
}

/// The camera axes stay aligned with the world; the desired view puts the
/// target `standoff` ahead along the optical axis.
fn chase<T: Real>(feedforward: bool, seconds: f64) -> Outcome {
    let dt: T = lit(1e-3);
    let v_target = Vector3::new(lit::<T>(0.2), lit(-0.1), T::zero());
    let standoff = Vector3::new(T::zero(), T::zero(), lit::<T>(0.4));
    let desired: Vec<Vector3<T>> = markers::<T>().iter().map(|m| standoff + m).collect();
    let h_t = centroid_from_points(&desired).unwrap();
    let l_t = h_t.l.unwrap();

    let mut target = Vector3::new(lit::<T>(0.15), lit(0.05), lit(0.5));
    let mut camera = Vector3::<T>::zeros();
    let gains = ServoGains::default();
    let observer_gains = ObserverGains::default();
    let identity = Rotation3::identity();
    let zero = Vector3::zeros();
    let mut observer = None;
    let steps = (seconds / 1e-3) as usize;
    for _ in 0..steps {
        let points: Vec<_> = markers::<T>()
            .iter()
            .map(|m| {
                let c = target + m - camera;
                project_to_sphere(&Vector2::new(c.x / c.z, c.y / c.z))
            })
            .collect();
        let h_o = target_centroid(&points).unwrap().h;
        let e = visual_error(&h_o, &h_t.h);
        let state = observer.unwrap_or_else(|| sto_init(&h_o));
        let y = sto_estimate(&state);
        let ff = if feedforward { y } else { zero };
        let v_c = base_reference_velocity(&e, &ff, &zero, &identity, &identity, &zero, &gains);
        observer = Some(sto_step(&state, &h_o, &zero, &v_c, &l_t, &observer_gains, dt).0);
        camera += v_c * dt;
        target += v_target * dt;
    }
    let y = sto_estimate(&observer.unwrap());
    Outcome {
        position_error: to_f64((target - camera - standoff).norm()),
        estimate_error: to_f64((y - v_target).norm()),
    }
}

#[test]
fn feedforward_removes_the_steady_lag() {
    let with = chase::<f64>(true, 20.0);
    let without = chase::<f64>(false, 20.0);
    assert!(with.position_error < 1e-3, "{}", with.position_error);
    assert!(with.estimate_error < 0.02, "{}", with.estimate_error);
    assert!(without.position_error > 100.0 * with.position_error, "{} vs {}", without.position_error, with.position_error);
}

#[test]
fn single_precision_follows_double() {
    let a = chase::<f64>(true, 10.0);
    let b = chase::<f32>(true, 10.0);
    assert!((a.position_error - b.position_error).abs() < 2e-3, "{} vs {}", a.position_error, b.position_error);
    assert!(b.estimate_error < 0.05);
}
