//! Task-set manifest: a line-delimited text file of `task_id <TAB> seed`
//! records, enough to regenerate any task of a run.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::TaskSource;

pub fn write_manifest(source: &dyn TaskSource, path: &Path) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..source.len() {
        let t = source.task(i);
        writeln!(out, "{}\t{}", t.id, t.seed)?;
    }
    out.flush()
}

pub fn read_manifest(path: &Path) -> std::io::Result<Vec<(u64, u64)>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let parse = |s: Option<&str>| {
            s.and_then(|v| v.parse().ok()).ok_or_else(|| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("manifest line {}: expected 'task_id<TAB>seed', got {line:?}", lineno + 1),
                )
            })
        };
        let id: u64 = parse(parts.next())?;
        let seed: u64 = parse(parts.next())?;
        out.push((id, seed));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{gen_lc_tasks, LcTaskSpec};

    #[test]
    fn manifest_round_trips() {
        let (train, _) = gen_lc_tasks(&LcTaskSpec {
            train_tasks: 5,
            test_tasks: 1,
            ..Default::default()
        })
        .unwrap();
        let dir = std::env::temp_dir().join(format!("manifest-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("tasks.manifest");
        write_manifest(&train, &path).unwrap();
        let records = read_manifest(&path).unwrap();
        assert_eq!(records.len(), 5);
        for (i, (id, seed)) in records.iter().enumerate() {
            let t = train.task(i);
            assert_eq!((*id, *seed), (t.id, t.seed));
        }
    }
}
