#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn tcri(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcri"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// One b-deck record line.
fn record(num: u32, stamp: &str, lat_tenths: u32, lon_tenths: u32, vmax: u16) -> String {
    format!("SH, {num:02}, {stamp},   , BEST,   0, {lat_tenths:>4}S, {lon_tenths:>5}E, {vmax:>3}, 1000, TS")
}

/// South Pacific cyclones, each intensifying at a constant rate, so the
/// 30 kt label is a function of the window's own slope. Seasons 1990–1998,
/// genesis in January at 160E. `rapid[i]` picks 10 kt/6 h versus 0–4 kt/6 h.
pub fn constant_rate_bdeck(per_season: u32) -> String {
    let mut lines = Vec::new();
    for season in 1990..=1998u32 {
        for n in 0..per_season {
            let k = season * 31 + n * 7;
            let rapid = k % 3 == 0;
            let slope: u16 = if rapid { 10 } else { (k % 5) as u16 };
            let len = 10 + (k % 6) as u16;
            let start: u16 = 20 + (k % 4) as u16 * 5;
            for step in 0..len {
                let day = 1 + (step / 4) as u32;
                let hour = (step % 4) as u32 * 6;
                let stamp = format!("{}01{day:02}{hour:02}", season + 1);
                lines.push(record(
                    n + 1,
                    &stamp,
                    150 + step as u32,
                    1600 + 3 * step as u32,
                    start + slope * step,
                ));
            }
        }
    }
    lines.join("\n") + "\n"
}

pub fn write_fixture(dir: &Path, per_season: u32) -> PathBuf {
    let path = dir.join("bdeck.txt");
    std::fs::write(&path, constant_rate_bdeck(per_season)).unwrap();
    path
}
