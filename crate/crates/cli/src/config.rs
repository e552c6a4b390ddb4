//! Run configuration: JSON with field-path diagnostics.

use std::path::{Path, PathBuf};

use holonet::cdiff::C64;
use holonet::expr::{Expr, ScalarFn};
use holonet::geometry::{BcSpec, BoundaryCondition, BoundaryCurve, Curve, Domain, Hole};
use holonet::nets::Arch;
use holonet::representations::ProblemDef;
use holonet::train::{ModelSpec, TrainConfig};
use holonet::{Error, Result};
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

pub const DEFAULT_GRID: usize = 100;
pub const SEED_ENV: &str = "HOLONET_SEED";

#[derive(Debug, Clone)]
pub struct Outputs {
    pub dir: PathBuf,
    pub grid: usize,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub problem: ProblemDef,
    pub domain: Domain,
    pub network: ModelSpec,
    pub train: TrainConfig,
    pub outputs: Outputs,
    /// Fully resolved configuration, suitable for re-running.
    pub resolved: Value,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub grid: Option<usize>,
    pub threads: Option<usize>,
}

fn err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| err(path, "expected an object"))
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| err(path, format!("missing field `{key}`")))
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn reject_unknown(obj: &Map<String, Value>, allowed: &[&str], path: &str) -> Result<()> {
    for k in obj.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(err(&join(path, k), format!("unknown field (expected one of {allowed:?})")));
        }
    }
    Ok(())
}

fn number(v: &Value, path: &str) -> Result<f64> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(err(path, format!("expected a finite number, got {v}"))),
    }
}

fn point(v: &Value, path: &str) -> Result<C64> {
    match v.as_array().map(|a| a.as_slice()) {
        Some([x, y]) => Ok(C64::new(number(x, &format!("{path}[0]"))?, number(y, &format!("{path}[1]"))?)),
        _ => Err(err(path, format!("expected a point [x, y], got {v}"))),
    }
}

fn typed<T: DeserializeOwned>(v: &Value, path: &str) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| err(path, e.to_string()))
}

fn scalar_fn(v: &Value, path: &str) -> Result<ScalarFn> {
    match v {
        Value::String(s) => Ok(ScalarFn::Expr(Expr::parse(s).map_err(|e| err(path, e.to_string()))?)),
        _ => Ok(ScalarFn::constant(number(v, path)?)),
    }
}

fn pair(v: &Value, path: &str) -> Result<[ScalarFn; 2]> {
    match v.as_array().map(|a| a.as_slice()) {
        Some([a, b]) => Ok([scalar_fn(a, &format!("{path}[0]"))?, scalar_fn(b, &format!("{path}[1]"))?]),
        _ => Err(err(path, "expected a pair [gx, gy] of numbers or expressions")),
    }
}

fn boundary_condition(v: &Value, path: &str) -> Result<BoundaryCondition> {
    let obj = object(v, path)?;
    if obj.len() != 1 {
        return Err(err(path, "expected exactly one of dirichlet, neumann, traction, displacement"));
    }
    let (kind, data) = obj.iter().next().expect("one entry");
    let p = join(path, kind);
    let spec = match kind.as_str() {
        "dirichlet" => BcSpec::Dirichlet(scalar_fn(data, &p)?),
        "neumann" => BcSpec::Neumann(scalar_fn(data, &p)?),
        "traction" => BcSpec::Traction(pair(data, &p)?),
        "displacement" => BcSpec::Displacement(pair(data, &p)?),
        other => return Err(err(path, format!("unknown boundary condition `{other}`"))),
    };
    Ok(BoundaryCondition::new(spec))
}

fn curve(v: &Value, path: &str) -> Result<BoundaryCurve> {
    let obj = object(v, path)?;
    reject_unknown(obj, &["segment", "arc", "circle", "bc", "flip_normal", "weights"], path)?;
    let shapes: Vec<&str> = ["segment", "arc", "circle"]
        .into_iter()
        .filter(|k| obj.contains_key(*k))
        .collect();
    if shapes.len() != 1 {
        return Err(err(path, "expected exactly one of segment, arc, circle"));
    }
    let shape = shapes[0];
    let sp = join(path, shape);
    let geometry = &obj[shape];
    let c = match shape {
        "segment" => match geometry.as_array().map(|a| a.as_slice()) {
            Some([a, b]) => Curve::segment(point(a, &format!("{sp}[0]"))?, point(b, &format!("{sp}[1]"))?),
            _ => return Err(err(&sp, "expected [[x1, y1], [x2, y2]]")),
        },
        "arc" => {
            let o = object(geometry, &sp)?;
            reject_unknown(o, &["center", "radius", "start", "end"], &sp)?;
            Curve::arc(
                point(field(o, "center", &sp)?, &join(&sp, "center"))?,
                number(field(o, "radius", &sp)?, &join(&sp, "radius"))?,
                number(field(o, "start", &sp)?, &join(&sp, "start"))?,
                number(field(o, "end", &sp)?, &join(&sp, "end"))?,
            )
        }
        _ => {
            let o = object(geometry, &sp)?;
            reject_unknown(o, &["center", "radius", "clockwise"], &sp)?;
            let clockwise = match o.get("clockwise") {
                None => false,
                Some(b) => b.as_bool().ok_or_else(|| err(&join(&sp, "clockwise"), "expected a boolean"))?,
            };
            Curve::circle(
                point(field(o, "center", &sp)?, &join(&sp, "center"))?,
                number(field(o, "radius", &sp)?, &join(&sp, "radius"))?,
                !clockwise,
            )
        }
    };
    c.validate().map_err(|e| err(&sp, e.to_string()))?;
    let bp = join(path, "bc");
    let mut bc = boundary_condition(field(obj, "bc", path)?, &bp)?;
    if let Some(w) = obj.get("weights") {
        let wp = join(path, "weights");
        bc = bc.with_weights(typed(w, &wp)?).map_err(|e| err(&wp, e.to_string()))?;
    }
    let mut out = BoundaryCurve::new(c, bc);
    if let Some(f) = obj.get("flip_normal") {
        out.flip_normal = f
            .as_bool()
            .ok_or_else(|| err(&join(path, "flip_normal"), "expected a boolean"))?;
    }
    Ok(out)
}

fn curves(v: &Value, path: &str) -> Result<Vec<BoundaryCurve>> {
    let arr = v.as_array().ok_or_else(|| err(path, "expected an array of curves"))?;
    arr.iter()
        .enumerate()
        .map(|(i, c)| curve(c, &format!("{path}[{i}]")))
        .collect()
}

pub fn parse_domain(v: &Value, path: &str) -> Result<Domain> {
    let obj = object(v, path)?;
    reject_unknown(obj, &["curves", "holes"], path)?;
    let outer = curves(field(obj, "curves", path)?, &join(path, "curves"))?;
    let mut holes = Vec::new();
    if let Some(h) = obj.get("holes") {
        let hp = join(path, "holes");
        let arr = h.as_array().ok_or_else(|| err(&hp, "expected an array of holes"))?;
        for (s, hole) in arr.iter().enumerate() {
            let p = format!("{hp}[{s}]");
            let o = object(hole, &p)?;
            reject_unknown(o, &["center", "curves"], &p)?;
            holes.push(Hole {
                center: point(field(o, "center", &p)?, &join(&p, "center"))?,
                curves: curves(field(o, "curves", &p)?, &join(&p, "curves"))?,
            });
        }
    }
    Domain::new(outer, holes).map_err(|e| err(path, e.to_string()))
}

fn parse_network(v: &Value, path: &str) -> Result<ModelSpec> {
    let mut obj = object(v, path)?.clone();
    let hole = obj.remove("hole");
    let arch: Arch = typed(&Value::Object(obj), path)?;
    let hole_arch = match hole {
        None => None,
        Some(h) => Some(typed(&h, &join(path, "hole"))?),
    };
    Ok(ModelSpec { arch, hole_arch })
}

fn network_value(spec: &ModelSpec) -> Value {
    let mut v = serde_json::to_value(&spec.arch).expect("architecture serializes");
    if let Some(h) = &spec.hole_arch {
        v["hole"] = serde_json::to_value(h).expect("architecture serializes");
    }
    v
}

fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| err(SEED_ENV, format!("expected an unsigned integer, got `{s}`"))),
        Err(_) => Ok(None),
    }
}

/// Seed precedence: command line, then config, then environment, then 0.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    Ok(seed_from_env()?.unwrap_or(0))
}

pub fn parse_config(v: &Value, base_dir: &Path, o: &Overrides) -> Result<RunConfig> {
    let obj = object(v, "")?;
    reject_unknown(obj, &["seed", "problem", "domain", "network", "train", "outputs"], "")?;
    let seed_cfg = match obj.get("seed") {
        None | Some(Value::Null) => None,
        Some(s) => Some(s.as_u64().ok_or_else(|| err("seed", "expected an unsigned integer"))?),
    };
    let seed = resolve_seed(o.seed, seed_cfg)?;
    let problem: ProblemDef = typed(field(obj, "problem", "")?, "problem")?;
    problem.build().map_err(|e| err("problem", e.to_string()))?;
    let domain = parse_domain(field(obj, "domain", "")?, "domain")?;
    let network = parse_network(field(obj, "network", "")?, "network")?;
    let mut train: TrainConfig = typed(field(obj, "train", "")?, "train")?;
    if let Some(t) = o.threads {
        train.threads = t;
    }
    train.validate()?;

    let mut dir = base_dir.join("out");
    let mut grid = DEFAULT_GRID;
    if let Some(out) = obj.get("outputs") {
        let oo = object(out, "outputs")?;
        reject_unknown(oo, &["dir", "grid"], "outputs")?;
        if let Some(d) = oo.get("dir") {
            let s = d.as_str().ok_or_else(|| err("outputs.dir", "expected a path string"))?;
            dir = base_dir.join(s);
        }
        if let Some(g) = oo.get("grid") {
            grid = g.as_u64().ok_or_else(|| err("outputs.grid", "expected an unsigned integer"))? as usize;
        }
    }
    if let Some(d) = &o.out_dir {
        dir = d.clone();
    }
    if let Some(g) = o.grid {
        grid = g;
    }
    if grid < 2 {
        return Err(err("outputs.grid", "grid resolution must be at least 2"));
    }

    let resolved = serde_json::json!({
        "seed": seed,
        "problem": serde_json::to_value(&problem).expect("problem serializes"),
        "domain": obj["domain"].clone(),
        "network": network_value(&network),
        "train": serde_json::to_value(&train).expect("train config serializes"),
        "outputs": { "dir": dir.display().to_string(), "grid": grid },
    });
    Ok(RunConfig {
        seed,
        problem,
        domain,
        network,
        train,
        outputs: Outputs { dir, grid },
        resolved,
    })
}

pub fn load_config(path: &Path, o: &Overrides) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| err(&path.display().to_string(), e.to_string()))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| err(&path.display().to_string(), e.to_string()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&v, base, o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn disc() -> Value {
        json!({
            "problem": {"kind": "laplace"},
            "domain": {"curves": [{"circle": {"center": [0, 0], "radius": 1}, "bc": {"dirichlet": "x^3 - 3*x*y^2"}}]},
            "network": {"family": "kan", "widths": [1, 4, 1], "degree": 3},
            "train": {"epochs": 10, "lr": 0.01, "n_train": 32}
        })
    }

    fn path_of(e: Error) -> String {
        match e {
            Error::Config { path, .. } => path,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn defaults_are_filled() {
        let c = parse_config(&disc(), Path::new("/tmp/x"), &Overrides { seed: Some(4), ..Default::default() }).unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.outputs.grid, DEFAULT_GRID);
        assert_eq!(c.outputs.dir, PathBuf::from("/tmp/x/out"));
        assert_eq!(c.resolved["train"]["test_fraction"], json!(0.2));
        assert_eq!(c.resolved["seed"], json!(4));
    }

    #[test]
    fn resolved_echo_parses_to_the_same_config() {
        let c = parse_config(&disc(), Path::new("/tmp"), &Overrides::default()).unwrap();
        let again = parse_config(&c.resolved, Path::new("/elsewhere"), &Overrides::default()).unwrap();
        assert_eq!(again.resolved, c.resolved);
        assert_eq!(again.train, c.train);
        assert_eq!(again.network, c.network);
    }

    #[test]
    fn errors_name_the_field() {
        let mut v = disc();
        v["domain"]["curves"][0]["circle"]["radius"] = json!("big");
        assert_eq!(path_of(parse_config(&v, Path::new("."), &Overrides::default()).unwrap_err()), "domain.curves[0].circle.radius");

        let mut v = disc();
        v["domain"]["holes"] = json!([{"center": [0.1], "curves": []}]);
        assert_eq!(path_of(parse_config(&v, Path::new("."), &Overrides::default()).unwrap_err()), "domain.holes[0].center");

        let mut v = disc();
        v["train"]["epochs"] = json!(-3);
        assert_eq!(path_of(parse_config(&v, Path::new("."), &Overrides::default()).unwrap_err()), "train");

        let mut v = disc();
        v["domain"]["curves"][0]["bc"] = json!({"traction": [1]});
        assert_eq!(path_of(parse_config(&v, Path::new("."), &Overrides::default()).unwrap_err()), "domain.curves[0].bc.traction");

        let mut v = disc();
        v["extra"] = json!(1);
        assert_eq!(path_of(parse_config(&v, Path::new("."), &Overrides::default()).unwrap_err()), "extra");
    }

    #[test]
    fn hole_center_outside_hole_is_rejected() {
        let mut v = disc();
        v["domain"]["curves"][0]["circle"]["radius"] = json!(2.0);
        v["domain"]["holes"] = json!([{"center": [0.9, 0], "curves": [
            {"circle": {"center": [0, 0], "radius": 0.5, "clockwise": true}, "bc": {"neumann": 0}}
        ]}]);
        assert_eq!(path_of(parse_config(&v, Path::new("."), &Overrides::default()).unwrap_err()), "domain");
        v["domain"]["holes"][0]["center"] = json!([0, 0]);
        parse_config(&v, Path::new("."), &Overrides::default()).unwrap();
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(3), Some(5)).unwrap(), 3);
        assert_eq!(resolve_seed(None, Some(5)).unwrap(), 5);
    }
}
