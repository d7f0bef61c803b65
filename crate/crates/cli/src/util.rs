//! Shared command plumbing: input loading, run manifests, exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use spoteval::annotation::AnnotationDoc;
use spoteval::metrics::ToleranceSpec;
use spoteval::taxonomy::Taxonomy;

/// Exit code contract: 0 success, 1 domain violations or failed
/// thresholds, 2 I/O or parse errors.
pub const EXIT_DOMAIN: u8 = 1;
pub const EXIT_IO: u8 = 2;

pub fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
        if let Some(e) = cause.downcast_ref::<spoteval::Error>() {
            return match e {
                spoteval::Error::Parse { .. }
                | spoteval::Error::Io(_)
                | spoteval::Error::TaxonomyConfig(_)
                | spoteval::Error::NonUniformFrames(_)
                | spoteval::Error::ScoreOutOfRange { .. } => EXIT_IO,
                _ => EXIT_DOMAIN,
            };
        }
    }
    EXIT_DOMAIN
}

/// `--taxonomy` accepts a bundled sport name or a config file path.
pub fn load_taxonomy(spec: &str) -> Result<Taxonomy> {
    if spec == "soccer" || spec == "handball" {
        return Ok(Taxonomy::builtin(spec)?);
    }
    let text = fs::read_to_string(spec).with_context(|| format!("reading taxonomy `{spec}`"))?;
    Ok(spoteval::taxonomy::load_taxonomy(&text)?)
}

pub fn load_doc(path: &Path) -> Result<AnnotationDoc> {
    let text = fs::read_to_string(path).with_context(|| format!("reading `{}`", path.display()))?;
    AnnotationDoc::parse(&text).with_context(|| format!("parsing `{}`", path.display()))
}

/// Tolerance windows: taxonomy defaults overlaid with an optional TOML file.
pub fn load_tolerances(taxonomy: &Taxonomy, tol_file: Option<&Path>) -> Result<ToleranceSpec> {
    let mut tol = ToleranceSpec::from_taxonomy(taxonomy);
    if let Some(path) = tol_file {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading `{}`", path.display()))?;
        let overlay: ToleranceSpec = toml::from_str(&text)
            .with_context(|| format!("parsing tolerance file `{}`", path.display()))?;
        tol.mode = overlay.mode;
        for (category, w) in overlay.w_eval {
            if category != "*" && !taxonomy.contains(&category) {
                return Err(spoteval::Error::UnknownNode(category).into());
            }
            tol.set(category, w);
        }
    }
    Ok(tol)
}

#[derive(Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    pub taxonomy: Option<TaxonomyInfo>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceSpec>,
}

#[derive(Serialize)]
pub struct TaxonomyInfo {
    pub sport: String,
    pub digest: String,
}

#[derive(Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(taxonomy: Option<&Taxonomy>) -> Self {
        RunManifest {
            tool: "spoteval",
            version: env!("CARGO_PKG_VERSION"),
            command: std::env::args().collect(),
            taxonomy: taxonomy.map(|t| TaxonomyInfo {
                sport: t.sport.clone(),
                digest: sha256_hex(t.to_config_string().as_bytes()),
            }),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
            tolerances: None,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("digesting `{}`", path.display()))?;
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }
}

/// Writer that collects outputs into a directory and records them in the
/// manifest; the manifest lands in the same directory.
pub struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<OutDir> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory `{}`", dir.display()))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
        })
    }

    pub fn write(&self, manifest: &mut RunManifest, name: &str, content: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, content).with_context(|| format!("writing `{}`", path.display()))?;
        manifest.outputs.push(path.display().to_string());
        Ok(path)
    }

    pub fn finish(&self, manifest: &RunManifest) -> Result<()> {
        let path = self.dir.join("manifest.json");
        let json = serde_json::to_string_pretty(manifest)?;
        fs::write(&path, json).with_context(|| format!("writing `{}`", path.display()))?;
        Ok(())
    }
}
