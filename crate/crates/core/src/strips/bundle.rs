use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{parse_domain, parse_instance, Diagnostic, DomainDefinition, Instance};

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{diagnostic}", path.display())]
    Parse { path: PathBuf, diagnostic: Diagnostic },
    #[error("{}: instance is for domain `{found}`, expected `{expected}`", path.display())]
    WrongDomain { path: PathBuf, expected: String, found: String },
}

/// A domain directory: `domain.strips`, `instances/*.inst` and optional
/// `plans/<instance-id>.plan` files holding one invocation per line.
/// `prompt/example.inst` with `prompt/example.plan` is the in-context
/// demonstration; it lives outside `instances/` so no split can use it.
#[derive(Debug, Clone)]
pub struct DomainBundle {
    pub root: PathBuf,
    pub domain: DomainDefinition,
    /// Sorted by instance id.
    pub instances: Vec<Instance>,
    pub plans: BTreeMap<String, Vec<String>>,
    pub example: Option<(Instance, Vec<String>)>,
}

fn read(path: &Path) -> Result<String, BundleError> {
    std::fs::read_to_string(path).map_err(|source| BundleError::Io { path: path.to_path_buf(), source })
}

fn files_with_extension(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, BundleError> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let entries = std::fs::read_dir(dir).map_err(|source| BundleError::Io { path: dir.to_path_buf(), source })?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|source| BundleError::Io { path: dir.to_path_buf(), source })?.path();
        if path.extension().is_some_and(|e| e == ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Non-blank, non-comment lines of a plan file.
pub fn parse_plan(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

impl DomainBundle {
    pub fn load(root: impl AsRef<Path>) -> Result<Self, BundleError> {
        let root = root.as_ref().to_path_buf();
        let domain_path = root.join("domain.strips");
        let domain = parse_domain(&read(&domain_path)?)
            .map_err(|diagnostic| BundleError::Parse { path: domain_path.clone(), diagnostic })?;

        let load_instance = |path: PathBuf| -> Result<Instance, BundleError> {
            let instance =
                parse_instance(&read(&path)?).map_err(|diagnostic| BundleError::Parse { path: path.clone(), diagnostic })?;
            if instance.domain != domain.name {
                return Err(BundleError::WrongDomain { path, expected: domain.name.clone(), found: instance.domain });
            }
            Ok(instance)
        };
        let mut instances = Vec::new();
        for path in files_with_extension(&root.join("instances"), "inst")? {
            instances.push(load_instance(path)?);
        }
        instances.sort_by(|a, b| a.id.cmp(&b.id));

        let mut plans = BTreeMap::new();
        for path in files_with_extension(&root.join("plans"), "plan")? {
            let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            plans.insert(id, parse_plan(&read(&path)?));
        }
        let example_path = root.join("prompt").join("example.inst");
        let example = if example_path.is_file() {
            let instance = load_instance(example_path)?;
            let plan_path = root.join("prompt").join("example.plan");
            let plan = if plan_path.is_file() { parse_plan(&read(&plan_path)?) } else { Vec::new() };
            Some((instance, plan))
        } else {
            None
        };
        Ok(DomainBundle { root, domain, instances, plans, example })
    }

    pub fn instance(&self, id: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.id == id)
    }

    /// Instances from `paths`, each an `.inst` file or a directory of them,
    /// in the given order (directories sorted by file name). Every instance
    /// must be for this bundle's domain.
    pub fn load_instances(&self, paths: &[PathBuf]) -> Result<Vec<Instance>, BundleError> {
        let mut files = Vec::new();
        for path in paths {
            if path.is_dir() {
                files.extend(files_with_extension(path, "inst")?);
            } else {
                files.push(path.clone());
            }
        }
        files
            .into_iter()
            .map(|path| {
                let instance = parse_instance(&read(&path)?)
                    .map_err(|diagnostic| BundleError::Parse { path: path.clone(), diagnostic })?;
                if instance.domain != self.domain.name {
                    return Err(BundleError::WrongDomain { path, expected: self.domain.name.clone(), found: instance.domain });
                }
                Ok(instance)
            })
            .collect()
    }
}
