//! Plain-text file formats.
//!
//! Every float is written with Rust's shortest round-trip formatting, so a
//! write followed by a read reproduces values bit for bit.
//!
//! World file (`world.tsv`):
//!
//! ```text
//! captionlab-world 1
//! seed <u64>
//! salience <p_object> <p_color> <p_size> <p_background> <p_position> <p_count>
//! scenes <n>
//! <id>\t<train|test>\t<a0,a1,a2,a3,a4,a5>\t<gt token ids, comma separated>\t<neighbor ids, comma separated>
//! ...
//! ```
//!
//! Matrix file: a `rows cols` header line then one row per line, values
//! separated by single spaces.
//!
//! Checkpoint file:
//!
//! ```text
//! captionlab-checkpoint <kind>
//! shape <k=v> <k=v> ...
//! config <hex digest>
//! len <n>
//! <value>
//! ...
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::discriminator::DiscriminatorParams;
use crate::error::{LabError, Result};
use crate::policy::{PolicyConfig, PolicyParameters};
use crate::retriever::RetrieverParams;
use crate::synthworld::{Caption, Provenance, SalienceProfile, Scene, Token, WorldDataset, NUM_ATTRIBUTES};

const WORLD_MAGIC: &str = "captionlab-world 1";
const CHECKPOINT_MAGIC: &str = "captionlab-checkpoint";

fn parse_num<T: FromStr>(text: &str, location: &str) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| LabError::parse(location, format!("cannot parse {text:?}")))
}

fn parse_list<T: FromStr>(text: &str, location: &str) -> Result<Vec<T>> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',').map(|x| parse_num(x, location)).collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn expect_field<'a>(line: Option<&'a str>, key: &str, location: &str) -> Result<&'a str> {
    let line = line.ok_or_else(|| LabError::parse(location, format!("missing `{key}` line")))?;
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| LabError::parse(location, format!("expected `{key} ...`, found {line:?}")))
}

/// Serializes a dataset without embeddings.
pub fn world_to_string(dataset: &WorldDataset) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{WORLD_MAGIC}");
    let _ = writeln!(out, "seed {}", dataset.seed);
    let sal: Vec<String> = dataset.salience.0.iter().map(f64::to_string).collect();
    let _ = writeln!(out, "salience {}", sal.join(" "));
    let _ = writeln!(out, "scenes {}", dataset.scenes.len());
    for (scene, caption) in dataset.scenes.iter().zip(&dataset.gt_captions) {
        let split = if dataset.is_test(scene.id) { "test" } else { "train" };
        let neighbors = dataset.neighbor_lists.get(scene.id).map(Vec::as_slice).unwrap_or(&[]);
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            scene.id,
            split,
            join(&scene.attributes),
            join(&caption.tokens),
            join(neighbors)
        );
    }
    out
}

pub fn world_from_str(text: &str) -> Result<WorldDataset> {
    let mut lines = text.lines();
    if lines.next() != Some(WORLD_MAGIC) {
        return Err(LabError::parse("world:1", "not a world file"));
    }
    let seed = parse_num(expect_field(lines.next(), "seed", "world:2")?, "world:2")?;
    let sal: Vec<f64> = expect_field(lines.next(), "salience", "world:3")?
        .split(' ')
        .map(|x| parse_num(x, "world:3"))
        .collect::<Result<_>>()?;
    let salience = SalienceProfile(
        sal.try_into()
            .map_err(|_| LabError::parse("world:3", format!("salience needs {NUM_ATTRIBUTES} values")))?,
    );
    let n: usize = parse_num(expect_field(lines.next(), "scenes", "world:4")?, "world:4")?;

    let mut dataset = WorldDataset {
        seed,
        salience,
        scenes: Vec::with_capacity(n),
        gt_captions: Vec::with_capacity(n),
        neighbor_lists: Vec::with_capacity(n),
        train_ids: Vec::new(),
        test_ids: Vec::new(),
    };
    for (i, line) in lines.enumerate() {
        let location = format!("world:{}", i + 5);
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(LabError::parse(&location, format!("expected 5 fields, found {}", fields.len())));
        }
        let id: usize = parse_num(fields[0], &location)?;
        if id != i {
            return Err(LabError::parse(&location, format!("scene id {id} out of sequence")));
        }
        match fields[1] {
            "train" => dataset.train_ids.push(id),
            "test" => dataset.test_ids.push(id),
            other => return Err(LabError::parse(&location, format!("unknown split {other:?}"))),
        }
        let attrs: Vec<u8> = parse_list(fields[2], &location)?;
        let attributes: [u8; NUM_ATTRIBUTES] = attrs
            .try_into()
            .map_err(|_| LabError::parse(&location, format!("expected {NUM_ATTRIBUTES} attributes")))?;
        let tokens: Vec<Token> = parse_list(fields[3], &location)?;
        dataset.scenes.push(Scene::new(id, attributes));
        dataset.gt_captions.push(Caption {
            tokens,
            provenance: Provenance::GroundTruth,
            scene_id: id,
        });
        dataset.neighbor_lists.push(parse_list(fields[4], &location)?);
    }
    if dataset.scenes.len() != n {
        return Err(LabError::parse("world", format!("header says {n} scenes, found {}", dataset.scenes.len())));
    }
    dataset.validate()?;
    Ok(dataset)
}

pub fn matrix_to_string(rows: usize, cols: usize, data: &[f64]) -> Result<String> {
    if data.len() != rows * cols {
        return Err(LabError::DimensionMismatch {
            expected: rows * cols,
            got: data.len(),
        });
    }
    let mut out = format!("{rows} {cols}\n");
    for r in 0..rows {
        let row: Vec<String> = data[r * cols..(r + 1) * cols].iter().map(f64::to_string).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok(out)
}

/// Reads one matrix from the front of `lines`, returning `(rows, cols, data)`.
fn read_matrix<'a>(lines: &mut impl Iterator<Item = &'a str>, name: &str) -> Result<(usize, usize, Vec<f64>)> {
    let header = lines
        .next()
        .ok_or_else(|| LabError::parse(name, "missing dimension header"))?;
    let dims: Vec<usize> = header
        .split(' ')
        .map(|x| parse_num(x, name))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(LabError::parse(name, format!("bad dimension header {header:?}")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| LabError::parse(name, format!("missing row {r}")))?;
        let before = data.len();
        for x in line.split(' ') {
            data.push(parse_num(x, name)?);
        }
        if data.len() - before != cols {
            return Err(LabError::parse(name, format!("row {r} has {} values, expected {cols}", data.len() - before)));
        }
    }
    Ok((rows, cols, data))
}

pub fn matrix_from_str(text: &str) -> Result<(usize, usize, Vec<f64>)> {
    read_matrix(&mut text.lines(), "matrix")
}

/// Text projection followed by image projection, each as a matrix block.
pub fn retriever_to_string(params: &RetrieverParams) -> Result<String> {
    let d = params.dim();
    let text = params.text_projection();
    let image = params.image_projection();
    Ok(matrix_to_string(text.len() / d, d, text)? + &matrix_to_string(image.len() / d, d, image)?)
}

pub fn retriever_from_str(text: &str) -> Result<RetrieverParams> {
    let mut lines = text.lines();
    let (_, d, text_projection) = read_matrix(&mut lines, "retriever text projection")?;
    let (_, d2, image_projection) = read_matrix(&mut lines, "retriever image projection")?;
    if d != d2 {
        return Err(LabError::DimensionMismatch { expected: d, got: d2 });
    }
    RetrieverParams::from_tables(d, text_projection, image_projection)
}

/// Flat parameter vector with its shape description and a config digest.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub shape: BTreeMap<String, String>,
    pub config_hash: String,
    pub values: Vec<f64>,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = format!("{CHECKPOINT_MAGIC} {}\nshape", self.kind);
        for (k, v) in &self.shape {
            let _ = write!(out, " {k}={v}");
        }
        let _ = write!(out, "\nconfig {}\nlen {}\n", self.config_hash, self.values.len());
        for v in &self.values {
            let _ = writeln!(out, "{v}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let kind = expect_field(lines.next(), CHECKPOINT_MAGIC, "checkpoint:1")?.to_string();
        let shape_line = lines
            .next()
            .and_then(|l| l.strip_prefix("shape"))
            .ok_or_else(|| LabError::parse("checkpoint:2", "missing shape line"))?;
        let mut shape = BTreeMap::new();
        for kv in shape_line.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| LabError::parse("checkpoint:2", format!("bad shape entry {kv:?}")))?;
            shape.insert(k.to_string(), v.to_string());
        }
        let config_hash = expect_field(lines.next(), "config", "checkpoint:3")?.to_string();
        let len: usize = parse_num(expect_field(lines.next(), "len", "checkpoint:4")?, "checkpoint:4")?;
        let values: Vec<f64> = lines
            .enumerate()
            .map(|(i, l)| parse_num(l, &format!("checkpoint:{}", i + 5)))
            .collect::<Result<_>>()?;
        if values.len() != len {
            return Err(LabError::DimensionMismatch {
                expected: len,
                got: values.len(),
            });
        }
        Ok(Self {
            kind,
            shape,
            config_hash,
            values,
        })
    }

    pub fn shape_value<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .shape
            .get(key)
            .ok_or_else(|| LabError::Missing(format!("checkpoint shape key `{key}`")))?;
        parse_num(raw, "checkpoint shape")
    }
}

pub fn policy_checkpoint(params: &PolicyParameters, config_hash: &str) -> Checkpoint {
    let c = params.config();
    let shape = [
        ("vocab_size", c.vocab_size.to_string()),
        ("hidden", c.hidden.to_string()),
        ("input_dim", c.input_dim.to_string()),
        ("context_every_step", c.context_every_step.to_string()),
    ];
    Checkpoint {
        kind: "policy".into(),
        shape: shape.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        config_hash: config_hash.to_string(),
        values: params.values().to_vec(),
    }
}

pub fn policy_from_checkpoint(ck: &Checkpoint) -> Result<PolicyParameters> {
    if ck.kind != "policy" {
        return Err(LabError::parse("checkpoint", format!("expected a policy checkpoint, found {:?}", ck.kind)));
    }
    let config = PolicyConfig {
        vocab_size: ck.shape_value("vocab_size")?,
        hidden: ck.shape_value("hidden")?,
        input_dim: ck.shape_value("input_dim")?,
        context_every_step: ck.shape_value("context_every_step")?,
    };
    PolicyParameters::from_values(config, ck.values.clone())
}

pub fn discriminator_checkpoint(params: &DiscriminatorParams, config_hash: &str) -> Checkpoint {
    let shape = [("input_dim", params.input_dim()), ("width", params.width())];
    Checkpoint {
        kind: "discriminator".into(),
        shape: shape.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        config_hash: config_hash.to_string(),
        values: params.values().to_vec(),
    }
}

pub fn discriminator_from_checkpoint(ck: &Checkpoint) -> Result<DiscriminatorParams> {
    if ck.kind != "discriminator" {
        return Err(LabError::parse(
            "checkpoint",
            format!("expected a discriminator checkpoint, found {:?}", ck.kind),
        ));
    }
    DiscriminatorParams::from_values(ck.shape_value("input_dim")?, ck.shape_value("width")?, ck.values.clone())
}

/// `key = value` lines; `#` starts a comment, blank lines are ignored.
/// Later keys override earlier ones.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| LabError::parse(format!("config:{}", i + 1), format!("expected `key = value`, found {raw:?}")))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(LabError::parse(format!("config:{}", i + 1), "empty key"));
        }
        out.insert(key.to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| LabError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents).map_err(|e| LabError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_values_with_comments_and_overrides() {
        let kv = parse_key_values("# header\nseed = 7\n\nalpha=0.5 # inline\nseed = 9\n").unwrap();
        assert_eq!(kv["seed"], "9");
        assert_eq!(kv["alpha"], "0.5");
        assert!(parse_key_values("no equals sign").is_err());
        assert!(parse_key_values(" = 3").is_err());
    }

    #[test]
    fn matrix_round_trip_is_exact() {
        let data = vec![0.1, -2.5e-17, 1.0 / 3.0, 7.0, f64::MIN_POSITIVE, -0.0];
        let text = matrix_to_string(2, 3, &data).unwrap();
        let (r, c, back) = matrix_from_str(&text).unwrap();
        assert_eq!((r, c), (2, 3));
        assert_eq!(back.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), data.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert!(matrix_to_string(2, 2, &data).is_err());
        assert!(matrix_from_str("2 2\n1 2\n3\n").is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut shape = BTreeMap::new();
        shape.insert("hidden".to_string(), "4".to_string());
        let ck = Checkpoint {
            kind: "policy".into(),
            shape,
            config_hash: "abc".into(),
            values: vec![1.5, -0.25, 1e-300],
        };
        let back = Checkpoint::from_text(&ck.to_text()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.shape_value::<usize>("hidden").unwrap(), 4);
        assert!(back.shape_value::<usize>("width").is_err());
    }
}
