use std::f64::consts::PI;

use super::{
    dist, sabine_rt60, schroeder_rt60, Air, AirLabels, Placement, RoomError, RoomSpec,
    SPEED_OF_SOUND,
};

/// Length of the windowed-sinc pulse used for each image.
pub const FRACTIONAL_DELAY_TAPS: usize = 81;
/// Images whose accumulated reflection loss `beta^b` falls below this are dropped.
const REFLECTION_FLOOR: f64 = 1e-4;
const MIN_SAMPLE_RATE: u32 = 8_000;

/// Render length used when none is given: 1.5 Sabine RT60s, at least 0.5 s.
pub fn default_max_time(room: &RoomSpec) -> f64 {
    (1.5 * sabine_rt60(room)).max(0.5)
}

/// Image offsets along one axis, paired with their wall-bounce counts.
fn axis_images(extent: f64, src: f64, mic: f64, reach: f64) -> Vec<(f64, u32)> {
    let max_n = (reach / (2.0 * extent)).ceil() as i64 + 1;
    let mut out = Vec::new();
    for n in -max_n..=max_n {
        for q in 0..2i64 {
            let pos = (1 - 2 * q) as f64 * src + 2.0 * n as f64 * extent;
            let delta = pos - mic;
            if delta.abs() <= reach {
                let bounces = ((n - q).abs() + n.abs()) as u32;
                out.push((delta, bounces));
            }
        }
    }
    out
}

/// Adds one band-limited pulse of `amp` at fractional sample `delay`.
fn add_pulse(buf: &mut [f64], delay: f64, amp: f64) {
    let half = (FRACTIONAL_DELAY_TAPS / 2) as i64;
    let centre = delay.round();
    let frac = delay - centre;
    let centre = centre as i64;
    let sin_frac = (PI * frac).sin();
    let span = half as f64 + 0.5;
    // Hann window phase, advanced by rotation instead of per-tap cos calls.
    let step = PI / span;
    let (step_sin, step_cos) = step.sin_cos();
    let theta0 = PI * (-(half as f64) - frac) / span;
    let (mut s, mut c) = theta0.sin_cos();
    for k in -half..=half {
        let n = centre + k;
        if n >= 0 && (n as usize) < buf.len() {
            let t = k as f64 - frac;
            let sinc = if t.abs() < 1e-12 {
                1.0
            } else {
                let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
                sign * sin_frac / (PI * t)
            };
            let window = 0.5 * (1.0 + c);
            buf[n as usize] += amp * sinc * window;
        }
        let (ns, nc) = (s * step_cos + c * step_sin, c * step_cos - s * step_sin);
        s = ns;
        c = nc;
    }
}

/// Renders the impulse response between `placement.source` and
/// `placement.mic` with the image-source method.
///
/// Each image contributes `beta^b / d` where `b` is its total number of wall
/// bounces and `d` its distance to the mic. Images are enumerated up to the
/// reflection order where `beta^b < 1e-4` or the arrival passes `max_time_s`.
pub fn simulate_air(
    room: &RoomSpec,
    placement: &Placement,
    sample_rate: u32,
    max_time_s: f64,
) -> Result<Air, RoomError> {
    if sample_rate < MIN_SAMPLE_RATE {
        return Err(RoomError::InvalidGeometry(format!(
            "sample rate {sample_rate} Hz below {MIN_SAMPLE_RATE} Hz"
        )));
    }
    if !room.contains(placement.mic) || !room.contains(placement.source) {
        return Err(RoomError::InvalidGeometry(
            "source or mic outside the room".into(),
        ));
    }
    let direct = dist(placement.mic, placement.source);
    if direct <= 0.0 {
        return Err(RoomError::InvalidGeometry("source and mic coincide".into()));
    }
    let fs = sample_rate as f64;
    let len = (max_time_s * fs).ceil() as usize;
    let direct_delay = direct / SPEED_OF_SOUND * fs;
    if !(max_time_s > 0.0) || direct_delay >= len as f64 {
        return Err(RoomError::InvalidGeometry(format!(
            "max_time {max_time_s} s ends before the direct path arrives"
        )));
    }

    let beta = room.reflection();
    let max_order = if beta > 0.0 {
        (REFLECTION_FLOOR.ln() / beta.ln()).floor() as u32
    } else {
        0
    };
    let reach = max_time_s * SPEED_OF_SOUND;
    let reach2 = reach * reach;
    let dims = room.dims();
    let axes: Vec<Vec<(f64, u32)>> = (0..3)
        .map(|a| axis_images(dims[a], placement.source[a], placement.mic[a], reach))
        .collect();
    let beta_pow = |b: u32| beta.powi(b as i32);

    let mut buf = vec![0.0f64; len];
    for &(dx, bx) in &axes[0] {
        let dx2 = dx * dx;
        if dx2 > reach2 || bx > max_order {
            continue;
        }
        for &(dy, by) in &axes[1] {
            let dxy2 = dx2 + dy * dy;
            if dxy2 > reach2 {
                continue;
            }
            let bxy = bx + by;
            if bxy > max_order {
                continue;
            }
            for &(dz, bz) in &axes[2] {
                let d2 = dxy2 + dz * dz;
                if d2 > reach2 {
                    continue;
                }
                let bounces = bxy + bz;
                if bounces > max_order {
                    continue;
                }
                let d = d2.sqrt();
                let amp = beta_pow(bounces) / d;
                let delay = d / SPEED_OF_SOUND * fs;
                if delay >= len as f64 {
                    continue;
                }
                add_pulse(&mut buf, delay, amp);
            }
        }
    }

    let sabine = sabine_rt60(room);
    let schroeder = match schroeder_rt60(&buf, sample_rate) {
        Ok(t) => t,
        Err(_) => {
            log::warn!(
                "room {} at {:?}: decay too short for a Schroeder fit, using Sabine",
                room.room_id,
                placement.grid_index
            );
            sabine
        }
    };
    Ok(Air {
        sample_rate,
        samples: buf,
        room_id: room.room_id.clone(),
        grid_index: placement.grid_index,
        labels: AirLabels {
            volume: room.volume(),
            rt60_sabine: sabine,
            rt60_schroeder: schroeder,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::room_sim::{energy_decay_db, grid_placements, GridSpec, ShapeCategory};

    fn argmax(x: &[f64]) -> usize {
        x.iter()
            .enumerate()
            .fold(
                (0, f64::MIN),
                |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
            )
            .0
    }

    #[test]
    fn integer_delay_pulse_is_a_delta() {
        let mut buf = vec![0.0; 100];
        add_pulse(&mut buf, 50.0, 2.0);
        for (i, v) in buf.iter().enumerate() {
            if i == 50 {
                assert!((v - 2.0).abs() < 1e-12);
            } else {
                assert!(v.abs() < 1e-12, "i={i} v={v}");
            }
        }
    }

    #[test]
    fn fractional_pulse_matches_direct_formula() {
        let mut buf = vec![0.0; 200];
        let delay = 100.3;
        add_pulse(&mut buf, delay, 1.0);
        for n in 60..=140 {
            let t = n as f64 - delay;
            let sinc = (PI * t).sin() / (PI * t);
            let w = if t.abs() < 40.5 {
                0.5 * (1.0 + (PI * t / 40.5).cos())
            } else {
                0.0
            };
            assert!((buf[n] - sinc * w).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn direct_path_peak_in_absorbing_room() {
        let room = RoomSpec::new("d", ShapeCategory::Square, 2.0, 2.0, 2.5, 0.8).unwrap();
        let p = Placement {
            mic: [1.0, 1.0, 1.2],
            source: [1.1, 1.0, 1.2],
            grid_index: (0, 0),
        };
        let air = simulate_air(&room, &p, 16_000, 0.5).unwrap();
        let expected = (0.1f64 / SPEED_OF_SOUND * 16_000.0).round() as i64;
        assert_eq!(expected, 5);
        assert!((argmax(&air.samples) as i64 - expected).abs() <= 2);
    }

    #[test]
    fn first_wall_reflection_arrives_on_time() {
        // mic 1 m from the x=0 wall, source on the same x-line further in
        let room = RoomSpec::new("w", ShapeCategory::Square, 10.0, 10.0, 5.0, 0.5).unwrap();
        let p = Placement {
            mic: [1.0, 5.0, 2.5],
            source: [1.5, 5.0, 2.5],
            grid_index: (0, 0),
        };
        let air = simulate_air(&room, &p, 16_000, 0.5).unwrap();
        // image of the source across x=0 sits at x=-1.5, 2.5 m from the mic
        let reflect = 2.5 / SPEED_OF_SOUND * 16_000.0;
        let lo = reflect.floor() as usize - 1;
        let hi = reflect.ceil() as usize + 1;
        let local = argmax(&air.samples[lo..=hi]) + lo;
        assert!(
            (local as f64 - reflect).abs() <= 1.0,
            "{local} vs {reflect}"
        );
    }

    #[test]
    fn truncated_render_is_rejected() {
        let room = RoomSpec::new("t", ShapeCategory::Square, 5.0, 5.0, 3.0, 0.5).unwrap();
        let p = Placement {
            mic: [1.0, 1.0, 1.0],
            source: [4.0, 4.0, 1.0],
            grid_index: (0, 0),
        };
        assert!(matches!(
            simulate_air(&room, &p, 16_000, 0.001),
            Err(RoomError::InvalidGeometry(_))
        ));
        let outside = Placement {
            mic: [6.0, 1.0, 1.0],
            ..p.clone()
        };
        assert!(matches!(
            simulate_air(&room, &outside, 16_000, 0.5),
            Err(RoomError::InvalidGeometry(_))
        ));
        assert!(simulate_air(&room, &p, 4_000, 0.5).is_err());
    }

    #[test]
    fn rendering_is_bit_deterministic() {
        let room = RoomSpec::new("d", ShapeCategory::Rectangle, 6.0, 3.0, 3.0, 0.3).unwrap();
        let p = &grid_placements(&room, &GridSpec::default()).unwrap()[7];
        let a = simulate_air(&room, p, 16_000, 0.6).unwrap();
        let b = simulate_air(&room, p, 16_000, 0.6).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples.len(), (0.6f64 * 16_000.0).ceil() as usize);
        assert!((a.labels.volume - 54.0).abs() < 1e-6);
    }

    #[test]
    fn mirrored_placement_has_matching_decay() {
        let room = RoomSpec::new("m", ShapeCategory::Rectangle, 6.0, 3.0, 3.0, 0.3).unwrap();
        let grid = grid_placements(&room, &GridSpec::default()).unwrap();
        let p = &grid[6];
        let mirror = Placement {
            mic: [room.length - p.mic[0], p.mic[1], p.mic[2]],
            source: [room.length - p.source[0], p.source[1], p.source[2]],
            grid_index: p.grid_index,
        };
        let a = simulate_air(&room, p, 16_000, 0.6).unwrap();
        let b = simulate_air(&room, &mirror, 16_000, 0.6).unwrap();
        let ea = energy_decay_db(&a.samples);
        let eb = energy_decay_db(&b.samples);
        for landmark in [-5.0, -10.0, -20.0, -30.0] {
            let ta = ea.iter().position(|&v| v <= landmark).unwrap() as f64;
            let tb = eb.iter().position(|&v| v <= landmark).unwrap() as f64;
            assert!(
                (ta - tb).abs() <= 0.01 * ta.max(1.0),
                "{landmark} dB: {ta} vs {tb}"
            );
        }
    }
}
