//! Named channels used by the experiments.

use crate::error::{Error, Result};
use crate::harness::config::{ChannelSpec, Cplx};
use crate::signal_model::TapPower;

pub const PRESETS: &[(&str, &str)] = &[
    ("dogancay7", "7-tap complex SISO channel"),
    ("mimo2x2", "2x2 MIMO channel with 3-tap sub-channels"),
    ("mix4x4", "4x4 instantaneous complex mixing matrix"),
    ("rayleigh3", "random 3-tap Rayleigh SISO channel, unit variance per tap"),
    ("identity", "distortionless single tap"),
];

const DOGANCAY7: [Cplx; 7] = [
    [-0.033, 0.014],
    [0.085, -0.039],
    [-0.232, 0.136],
    [0.634, -0.445],
    [0.07, -0.233],
    [-0.027, -0.071],
    [-0.023, -0.012],
];

/// `[receiver][source][lag]`.
const MIMO2X2: [[[Cplx; 3]; 2]; 2] = [
    [
        [[-0.2, 0.1], [1.0, 0.0], [0.0, 0.2]],
        [[0.0, 0.1], [0.2, 0.0], [0.11, 0.0]],
    ],
    [
        [[0.0, 0.1], [0.1, 0.0], [0.0, 0.2]],
        [[1.0, 0.0], [0.0, 0.1], [0.1, 0.1]],
    ],
];

const MIX4X4: [[Cplx; 4]; 4] = [
    [[0.41, 0.05], [0.45, 0.62], [0.26, 0.92], [-0.25, -0.61]],
    [[0.52, -1.11], [1.04, -0.12], [0.06, 0.66], [-0.81, 0.21]],
    [[0.07, -0.80], [1.30, 0.33], [1.40, 0.65], [-0.05, 0.94]],
    [[0.47, -1.08], [0.83, 0.43], [0.94, -0.08], [0.57, 0.19]],
];

pub fn preset(name: &str) -> Result<ChannelSpec> {
    Ok(match name {
        "dogancay7" => ChannelSpec::Fir {
            taps: vec![vec![DOGANCAY7.to_vec()]],
        },
        "mimo2x2" => ChannelSpec::Fir {
            taps: MIMO2X2
                .iter()
                .map(|row| row.iter().map(|h| h.to_vec()).collect())
                .collect(),
        },
        "mix4x4" => ChannelSpec::Flat {
            matrix: MIX4X4.iter().map(|row| row.to_vec()).collect(),
        },
        "rayleigh3" => ChannelSpec::Random {
            n_rx: 1,
            n_tx: 1,
            taps: 3,
            power: TapPower::PerTap,
        },
        "identity" => ChannelSpec::Fir {
            taps: vec![vec![vec![[1.0, 0.0]]]],
        },
        _ => {
            return Err(Error::UnknownPreset {
                name: name.to_string(),
                available: PRESETS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", "),
            })
        }
    })
}

/// The preset as a `[channel]` table, ready to paste into a scenario file.
pub fn preset_toml(name: &str) -> Result<String> {
    #[derive(serde::Serialize)]
    struct Wrap {
        channel: ChannelSpec,
    }
    toml::to_string(&Wrap { channel: preset(name)? }).map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_model::C64;

    #[test]
    fn preset_coefficients() {
        let d = preset("dogancay7").unwrap().realize(0).unwrap();
        assert_eq!(d.tap(0, 0, 3), C64::new(0.634, -0.445));
        let m = preset("mimo2x2").unwrap().realize(0).unwrap();
        assert_eq!(m.tap(1, 1, 0), C64::new(1.0, 0.0));
        assert_eq!(m.sub_channel(0, 0), &[C64::new(-0.2, 0.1), C64::new(1.0, 0.0), C64::new(0.0, 0.2)]);
        let x = preset("mix4x4").unwrap().realize(0).unwrap();
        assert_eq!(x.tap(0, 0, 0), C64::new(0.41, 0.05));
        assert_eq!(x.n_tx(), 4);
        assert!(preset("rayleigh3").unwrap().is_random().unwrap());
    }

    #[test]
    fn unknown_preset_lists_names() {
        let msg = preset("nope").unwrap_err().to_string();
        for (n, _) in PRESETS {
            assert!(msg.contains(n));
        }
    }
}
