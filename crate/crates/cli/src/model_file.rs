//! Line-oriented `key = value` model files for `simulate --spec`.
//!
//! ```text
//! d = 3
//! alpha = 2
//! structural = maxnoise          # sum | max | maxnoise | hr
//! activation = 1, 0.5, 0.5
//! eps = lognormal 0 0.5          # or: const 1
//! edge 1 2 0.8
//! edge 2 3 0.3
//! ```
//!
//! Keys not relevant to the chosen model are rejected.

use std::collections::BTreeMap;
use std::str::FromStr;

use extorder::margins::TailIndex;
use extorder::simulate::{AngleLaw, CoeffLaw, EdgeCoeffs, NoiseLaw, SecondOrderPairSpec};
use extorder::{Error, Result};

/// Every key understood by some model.
const ALL_KEYS: [&str; 17] = [
    "d",
    "alpha",
    "alpha0",
    "avg_degree",
    "coeff",
    "coeff_draw",
    "structural",
    "activation",
    "eps",
    "mu",
    "sigma",
    "a",
    "b",
    "rho",
    "off_mass",
    "angles",
    "edge",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelFile {
    values: BTreeMap<String, (usize, String)>,
    /// `edge u v coeff` lines in file order.
    pub edges: Vec<(usize, usize, f64)>,
}

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = ModelFile::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix("edge ") {
                let f: Vec<&str> = rest.split_whitespace().collect();
                let [u, v, c] = f[..] else {
                    return Err(config_err(line, "expected `edge u v coeff`"));
                };
                let parse_node = |s: &str| s.parse::<usize>().map_err(|_| config_err(line, format!("bad node id {s:?}")));
                let c: f64 = c.parse().map_err(|_| config_err(line, format!("bad coefficient {c:?}")))?;
                out.edges.push((parse_node(u)?, parse_node(v)?, c));
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| config_err(line, format!("expected `key = value`, got {content:?}")))?;
            let key = key.trim();
            if !ALL_KEYS.contains(&key) || key == "edge" {
                return Err(config_err(line, format!("unknown key {key:?}")));
            }
            if out.values.contains_key(key) {
                return Err(config_err(line, format!("key {key:?} given twice")));
            }
            out.values.insert(key.to_owned(), (line, value.trim().to_owned()));
        }
        Ok(out)
    }

    /// Errors on any key outside `allowed` (edges are checked separately).
    pub fn restrict(&self, model: &str, allowed: &[&str]) -> Result<()> {
        if let Some((key, (line, _))) = self.values.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(config_err(*line, format!("key {key:?} does not apply to model {model}")));
        }
        Ok(())
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.values.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| config_err(line, format!("invalid value {v:?} for {key}"))),
        }
    }

    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse()
                        .map_err(|_| config_err(line, format!("invalid number {x:?} in {key}")))
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }

    pub fn edge_coeffs(&self) -> EdgeCoeffs {
        self.edges.iter().map(|&(u, v, c)| ((u, v), c)).collect()
    }

    /// `coeff = uniform l u` or `coeff = lognormal l u coverage`.
    pub fn coeff_law(&self) -> Result<Option<CoeffLaw>> {
        let Some((line, v)) = self.raw("coeff") else {
            return Ok(None);
        };
        let f: Vec<&str> = v.split_whitespace().collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| config_err(line, format!("bad number {s:?}")));
        match f[..] {
            ["uniform", l, u] => CoeffLaw::uniform(num(l)?, num(u)?).map(Some),
            ["lognormal", l, u, c] => CoeffLaw::lognormal_matched(num(l)?, num(u)?, num(c)?).map(Some),
            ["fixed", c] => CoeffLaw::fixed(num(c)?).map(Some),
            _ => Err(config_err(
                line,
                "coeff must be `uniform l u`, `lognormal l u coverage` or `fixed c`",
            )),
        }
    }

    /// `eps = const c` or `eps = lognormal mu sigma`.
    pub fn noise_law(&self) -> Result<Option<NoiseLaw>> {
        let Some((line, v)) = self.raw("eps") else {
            return Ok(None);
        };
        let f: Vec<&str> = v.split_whitespace().collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| config_err(line, format!("bad number {s:?}")));
        match f[..] {
            ["const", c] => Ok(Some(NoiseLaw::Constant(num(c)?))),
            ["lognormal", mu, sigma] => Ok(Some(NoiseLaw::LogNormal {
                mu: num(mu)?,
                sigma: num(sigma)?,
            })),
            _ => Err(config_err(line, "eps must be `const c` or `lognormal mu sigma`")),
        }
    }

    /// `angles = uniform` or `angles = atoms w:p, w:p, ...`.
    pub fn angle_law(&self) -> Result<Option<AngleLaw>> {
        let Some((line, v)) = self.raw("angles") else {
            return Ok(None);
        };
        if v == "uniform" {
            return Ok(Some(AngleLaw::Uniform));
        }
        let Some(rest) = v.strip_prefix("atoms") else {
            return Err(config_err(line, "angles must be `uniform` or `atoms w:p, ...`"));
        };
        rest.split(',')
            .map(|pair| {
                let (w, p) = pair
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| config_err(line, format!("atom {pair:?} is not `w:p`")))?;
                let num = |s: &str| s.trim().parse::<f64>().map_err(|_| config_err(line, format!("bad number {s:?}")));
                Ok((num(w)?, num(p)?))
            })
            .collect::<Result<Vec<_>>>()
            .map(|atoms| Some(AngleLaw::Atoms(atoms)))
    }

    pub fn second_order_pair(&self) -> Result<SecondOrderPairSpec> {
        self.restrict("so2pair", &["a", "b", "alpha", "rho", "off_mass", "angles"])?;
        SecondOrderPairSpec::new(
            self.get("a")?.unwrap_or(0.2),
            self.get("b")?.unwrap_or(0.7),
            TailIndex::new(self.get("alpha")?.unwrap_or(2.0))?,
            self.get("rho")?.unwrap_or(1.0),
            self.get("off_mass")?.unwrap_or(0.1),
            self.angle_law()?.unwrap_or(AngleLaw::Uniform),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_edges() {
        let f = ModelFile::parse(
            "# model\nd = 3\nactivation = 1, 0.5,0.25\neps = lognormal 0 0.5\nedge 1 2 0.8\nedge 2 3 0.3 # tail\n",
        )
        .unwrap();
        assert_eq!(f.get::<usize>("d").unwrap(), Some(3));
        assert_eq!(f.list("activation").unwrap().unwrap(), vec![1.0, 0.5, 0.25]);
        assert_eq!(f.edges, vec![(1, 2, 0.8), (2, 3, 0.3)]);
        assert_eq!(f.noise_law().unwrap(), Some(NoiseLaw::LogNormal { mu: 0.0, sigma: 0.5 }));
    }

    #[test]
    fn rejects_unknown_and_repeated_keys() {
        let err = ModelFile::parse("d = 3\nfoo = 1\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        assert!(ModelFile::parse("d = 3\nd = 4\n").is_err());
        assert!(ModelFile::parse("edge 1 2\n").is_err());
        let f = ModelFile::parse("rho = 2\n").unwrap();
        assert!(f.restrict("sl0", &["d"]).is_err());
    }

    #[test]
    fn laws() {
        let f = ModelFile::parse("coeff = lognormal 0.04 0.4 0.95\nangles = atoms 0:0.5, 1:0.5").unwrap();
        assert!(matches!(f.coeff_law().unwrap(), Some(CoeffLaw::LogNormalMatched { .. })));
        assert_eq!(f.angle_law().unwrap(), Some(AngleLaw::Atoms(vec![(0.0, 0.5), (1.0, 0.5)])));
        assert!(ModelFile::parse("coeff = gamma 1").unwrap().coeff_law().is_err());
    }

    #[test]
    fn second_order_defaults_and_overrides() {
        let spec = ModelFile::parse("a = 0.1\nrho = 2").unwrap().second_order_pair().unwrap();
        assert_eq!((spec.a, spec.b, spec.rho, spec.off_mass), (0.1, 0.7, 2.0, 0.1));
        assert!(ModelFile::parse("a = 0\nb = 1").unwrap().second_order_pair().is_err());
    }
}
