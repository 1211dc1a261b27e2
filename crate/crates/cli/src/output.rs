//! CSV, JSON and manifest writers. Floats are written in their shortest
//! round-trip form, so equal runs give byte-identical files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use branchlevy_core::engine::Trajectory;
use branchlevy_core::spine::SpineTrajectory;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `replica,time,n_particles,W,overflow`; a replica that overflowed before
/// its first query time contributes no rows.
pub fn trajectory_csv(rows: &[(u64, Option<Trajectory>)]) -> String {
    let mut s = String::from("replica,time,n_particles,W,overflow\n");
    for (r, tr) in rows {
        if let Some(tr) = tr {
            for snap in &tr.snapshots {
                s.push_str(&format!("{r},{},{},{},{}\n", snap.time, snap.n_particles, snap.w, tr.overflow));
            }
        }
    }
    s
}

/// `replica,time,xi_hat,wstar,n_atoms_so_far`.
pub fn spine_csv(rows: &[(u64, SpineTrajectory)]) -> String {
    let mut s = String::from("replica,time,xi_hat,wstar,n_atoms_so_far\n");
    for (r, sp) in rows {
        for p in &sp.points {
            s.push_str(&format!("{r},{},{},{},{}\n", p.time, p.xi_hat, p.wstar, p.n_atoms));
        }
    }
    s
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports always serialize");
    s.push('\n');
    s
}

/// Collects the files of one run and writes the manifest last.
pub struct OutputDir {
    pub dir: PathBuf,
    files: Vec<(String, String)>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let f = fs::File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(f);
        w.write_all(contents.as_bytes()).map_err(io_err(&path))?;
        w.flush().map_err(io_err(&path))?;
        self.files.push((name.to_string(), sha256_hex(contents.as_bytes())));
        Ok(path)
    }

    /// `manifest.json`: scenario hash, seed, versions and output digests.
    /// No timestamps, so reruns reproduce it byte for byte.
    pub fn finish(mut self, command: &str, scenario_name: &str, scenario_toml: &str, seed: u64) -> Result<Vec<PathBuf>, CliError> {
        #[derive(Serialize)]
        struct FileEntry<'a> {
            name: &'a str,
            sha256: &'a str,
        }
        #[derive(Serialize)]
        struct Manifest<'a> {
            command: &'a str,
            scenario: &'a str,
            scenario_sha256: String,
            seed: u64,
            branchlevy_version: &'a str,
            core_version: &'a str,
            outputs: Vec<FileEntry<'a>>,
        }
        let files = std::mem::take(&mut self.files);
        let manifest = Manifest {
            command,
            scenario: scenario_name,
            scenario_sha256: sha256_hex(scenario_toml.as_bytes()),
            seed,
            branchlevy_version: env!("CARGO_PKG_VERSION"),
            core_version: branchlevy_core::VERSION,
            outputs: files.iter().map(|(n, h)| FileEntry { name: n, sha256: h }).collect(),
        };
        let text = to_json_string(&manifest);
        let mut paths: Vec<PathBuf> = files.iter().map(|(n, _)| self.dir.join(n)).collect();
        paths.push(self.write("manifest.json", &text)?);
        Ok(paths)
    }
}
