//! Parser for the `--disturbance` mini-language:
//! `none`, `drift:vx,vy`, `localized:t0,dur,vx,vy`, `engine-off:t0,dur,vx,vy`.

use stable_lfd::sim::{Disturbance, LocalizedMode};

fn numbers(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| {
            let p = p.trim();
            p.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("'{p}' is not a finite number"))
        })
        .collect()
}

pub fn parse(spec: &str) -> Result<Disturbance, String> {
    let spec = spec.trim();
    if spec == "none" {
        return Ok(Disturbance::None);
    }
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| format!("expected none, drift:…, localized:… or engine-off:…, got '{spec}'"))?;
    let v = numbers(rest)?;
    match kind {
        "drift" => {
            if v.is_empty() {
                return Err("drift needs a velocity vector".into());
            }
            Ok(Disturbance::ConstantDrift(v))
        }
        "localized" | "engine-off" => {
            if v.len() < 3 {
                return Err(format!("{kind} needs t0,dur followed by a velocity vector"));
            }
            if v[1] <= 0.0 {
                return Err("duration must be > 0".into());
            }
            let drift = v[2..].to_vec();
            let mode = if kind == "localized" {
                LocalizedMode::Drift(drift)
            } else {
                LocalizedMode::FreezeDynamics(drift)
            };
            Ok(Disturbance::Localized {
                t_start: v[0],
                duration: v[1],
                mode,
            })
        }
        other => Err(format!("unknown disturbance kind '{other}'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_kind() {
        assert_eq!(parse("none").unwrap(), Disturbance::None);
        assert_eq!(
            parse("drift:0.5,-1").unwrap(),
            Disturbance::ConstantDrift(vec![0.5, -1.0])
        );
        assert_eq!(
            parse("engine-off:10,5,0.3,0.1").unwrap(),
            Disturbance::Localized {
                t_start: 10.0,
                duration: 5.0,
                mode: LocalizedMode::FreezeDynamics(vec![0.3, 0.1]),
            }
        );
        assert!(matches!(
            parse("localized:1,2,3,4").unwrap(),
            Disturbance::Localized {
                mode: LocalizedMode::Drift(_),
                ..
            }
        ));
    }

    #[test]
    fn rejects_malformed_specs() {
        for bad in ["", "drift", "drift:", "gust:1,2", "engine-off:1,0,1,1", "localized:1,2", "drift:a,b", "drift:inf,0"] {
            assert!(parse(bad).is_err(), "{bad}");
        }
    }
}
