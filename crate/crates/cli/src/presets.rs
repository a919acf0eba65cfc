use clap::ValueEnum;
use serde::{Deserialize, Serialize};

/// Sampling grids tuned per dataset; the default point is the middle of
/// each grid with `M = 64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Reddit,
    Wikipedia,
    Mooc,
    Socialevo,
    Enron,
    Uci,
}

pub struct Grid {
    pub walks: &'static [usize],
    pub alpha: &'static [f64],
    pub length: &'static [usize],
    pub default_alpha: f64,
    pub default_length: usize,
}

const WALKS: &[usize] = &[32, 64, 128];

impl Preset {
    pub fn grid(self) -> Grid {
        match self {
            Preset::Reddit => Grid {
                walks: WALKS,
                alpha: &[0.25e-5, 0.5e-5, 1.0e-5, 2.0e-5, 4.0e-5],
                length: &[1, 2, 3, 4],
                default_alpha: 1.0e-5,
                default_length: 2,
            },
            Preset::Wikipedia => Grid {
                walks: WALKS,
                alpha: &[0.25e-6, 0.5e-6, 1.0e-6, 2.0e-6, 4.0e-6],
                length: &[2, 3, 4],
                default_alpha: 1.0e-6,
                default_length: 3,
            },
            Preset::Mooc => Grid {
                walks: WALKS,
                alpha: &[0.25e-6, 0.5e-6, 1.0e-6, 2.0e-6, 4.0e-6],
                length: &[2, 3, 4, 5],
                default_alpha: 1.0e-6,
                default_length: 3,
            },
            Preset::Socialevo => Grid {
                walks: WALKS,
                alpha: &[0.25e-6, 0.5e-6, 1.0e-6, 2.0e-6, 4.0e-6, 8.0e-6],
                length: &[1, 2, 3],
                default_alpha: 1.0e-6,
                default_length: 2,
            },
            Preset::Enron => Grid {
                walks: WALKS,
                alpha: &[0.25e-7, 0.5e-7, 1.0e-7, 2.0e-7, 4.0e-7],
                length: &[1, 2, 3, 4],
                default_alpha: 1.0e-7,
                default_length: 2,
            },
            Preset::Uci => Grid {
                walks: WALKS,
                alpha: &[0.6e-5, 0.8e-5, 1.0e-5, 1.2e-5, 1.4e-5],
                length: &[1, 2, 3],
                default_alpha: 1.0e-5,
                default_length: 2,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Reddit => "reddit",
            Preset::Wikipedia => "wikipedia",
            Preset::Mooc => "mooc",
            Preset::Socialevo => "socialevo",
            Preset::Enron => "enron",
            Preset::Uci => "uci",
        }
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

pub fn table() -> String {
    let mut out = String::from("preset\tM\talpha\tm\tdefault_M\tdefault_alpha\tdefault_m\n");
    for p in Preset::value_variants() {
        let g = p.grid();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t64\t{}\t{}\n",
            p.name(),
            join(g.walks),
            join(g.alpha),
            join(g.length),
            g.default_alpha,
            g.default_length
        ));
    }
    out
}
