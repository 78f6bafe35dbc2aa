//! Input configuration: schema, strict parsing, validation.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{DirEdge, Graph};
use crate::graphmap::{GraphMap, Length, MarkedGraph, Marking};
use crate::words::{Endomorphism, Letter, Word};

/// Search caps and sample sizes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Caps {
    pub pullback: usize,
    pub disjointness: usize,
    pub expansion: usize,
    /// Loops per word in the hyperbolicity and flaring audits.
    pub audit_loops: usize,
    pub audit_loop_length: usize,
    /// Loops in the sampled check of the expansion certificate.
    pub expansion_loops: usize,
    pub expansion_loop_length: usize,
    /// Largest thinness in the flaring audit.
    pub rho_max: usize,
}

impl Default for Caps {
    fn default() -> Caps {
        Caps {
            pullback: 16,
            disjointness: 8,
            expansion: 64,
            audit_loops: 200,
            audit_loop_length: 12,
            expansion_loops: 1000,
            expansion_loop_length: 30,
            rho_max: 4,
        }
    }
}

/// An explicit topological representative on a marked graph. Edge images use
/// signed 1-based edge numbers; the marking gives the word read along each
/// edge.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepresentativeSpec {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<Length>>,
    pub base: usize,
    pub marking: Vec<String>,
    pub vertex_map: Vec<usize>,
    pub images: Vec<Vec<i32>>,
}

impl RepresentativeSpec {
    pub fn build(&self, rank: usize) -> Result<GraphMap> {
        let graph = Graph::new(self.vertices, self.edges.clone())?;
        let edge_words = self
            .marking
            .iter()
            .map(|s| Word::parse(s, rank))
            .collect::<Result<Vec<_>>>()?;
        let marked = MarkedGraph::new(
            graph,
            self.lengths.clone(),
            Marking {
                base: self.base,
                edge_words,
            },
        )?;
        let images = self
            .images
            .iter()
            .map(|img| {
                img.iter()
                    .map(|&s| DirEdge::from_signed(s).ok_or_else(|| Error::InvalidMap("edge 0 in image".into())))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        GraphMap::new(marked.clone(), marked, self.vertex_map.clone(), images)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificationConfig {
    pub rank: usize,
    #[serde(serialize_with = "ser_endos", deserialize_with = "de_endos")]
    pub endos: Vec<Endomorphism>,
    #[serde(default)]
    pub caps: Caps,
    /// One entry per endomorphism; `null` selects the rose.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub marking_maps: Vec<Option<RepresentativeSpec>>,
    #[serde(default)]
    pub seed: u64,
    /// Run the lamination diagnostics.
    #[serde(default)]
    pub diagnostics: bool,
}

impl CertificationConfig {
    /// A config with default caps. Rank one is allowed here for the
    /// degenerate single-loop fixtures; [`parse_config`] requires rank two.
    pub fn new(endos: Vec<Endomorphism>) -> Result<CertificationConfig> {
        let rank = endos.first().map(Endomorphism::rank).unwrap_or(0);
        let c = CertificationConfig {
            rank,
            endos,
            caps: Caps::default(),
            marking_maps: Vec::new(),
            seed: 0,
            diagnostics: false,
        };
        c.validate(1)?;
        Ok(c)
    }

    /// Convenience constructor from letter syntax.
    pub fn from_letters(endos: &[&[&str]]) -> Result<CertificationConfig> {
        CertificationConfig::new(endos.iter().map(|e| Endomorphism::parse(e)).collect::<Result<_>>()?)
    }

    pub fn validate(&self, min_rank: usize) -> Result<()> {
        if self.rank < min_rank {
            return Err(Error::Config(format!("rank must be at least {min_rank}, got {}", self.rank)));
        }
        if self.endos.is_empty() {
            return Err(Error::Config("at least one endomorphism required".into()));
        }
        for (i, e) in self.endos.iter().enumerate() {
            if e.rank() != self.rank {
                return Err(Error::Config(format!(
                    "endomorphism {} has {} images, expected {}",
                    i + 1,
                    e.rank(),
                    self.rank
                )));
            }
        }
        if !self.marking_maps.is_empty() && self.marking_maps.len() != self.endos.len() {
            return Err(Error::Config(format!(
                "marking_maps has {} entries for {} endomorphisms",
                self.marking_maps.len(),
                self.endos.len()
            )));
        }
        let c = &self.caps;
        if c.pullback == 0 || c.disjointness == 0 || c.expansion == 0 {
            return Err(Error::Config("caps must be positive".into()));
        }
        if c.audit_loop_length == 0 || c.expansion_loop_length == 0 || c.rho_max == 0 {
            return Err(Error::Config("loop lengths and rho_max must be positive".into()));
        }
        Ok(())
    }

    pub fn representative(&self, i: usize) -> Option<&RepresentativeSpec> {
        self.marking_maps.get(i).and_then(Option::as_ref)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WordSpec {
    Letters(String),
    Integers(Vec<Letter>),
}

fn ser_endos<S: Serializer>(endos: &[Endomorphism], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(endos.len()))?;
    for e in endos {
        if e.rank() <= 26 {
            seq.serialize_element(&e.to_letter_strings())?;
        } else {
            let ints: Vec<&[Letter]> = e.images().iter().map(Word::letters).collect();
            seq.serialize_element(&ints)?;
        }
    }
    seq.end()
}

fn de_endos<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Endomorphism>, D::Error> {
    let raw: Vec<Vec<WordSpec>> = Vec::deserialize(d)?;
    raw.into_iter()
        .map(|images| {
            let n = images.len();
            let words = images
                .into_iter()
                .map(|w| match w {
                    WordSpec::Letters(s) => Word::parse(&s, n),
                    WordSpec::Integers(v) => Word::reduce(&v, n),
                })
                .collect::<Result<Vec<_>>>()
                .map_err(D::Error::custom)?;
            Endomorphism::new(words).map_err(D::Error::custom)
        })
        .collect()
}

/// Parsing switches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Drop unknown fields with a warning instead of failing.
    pub lenient: bool,
}

/// Strict parse of the JSON schema; see [`parse_config_with`].
pub fn parse_config(text: &[u8]) -> Result<CertificationConfig> {
    parse_config_with(text, ParseOptions::default()).map(|(c, _)| c)
}

/// Parses and validates a config, returning it with any warnings.
pub fn parse_config_with(text: &[u8], opts: ParseOptions) -> Result<(CertificationConfig, Vec<String>)> {
    let text = std::str::from_utf8(text).map_err(|e| Error::Parse {
        line: 1,
        column: e.valid_up_to() + 1,
        message: "input is not UTF-8".into(),
    })?;
    let located = |e: serde_json::Error| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    let mut warnings = Vec::new();
    let config: CertificationConfig = if opts.lenient {
        let mut value: serde_json::Value = serde_json::from_str(text).map_err(located)?;
        strip_unknown(&mut value, &mut warnings);
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?
    } else {
        serde_json::from_str(text).map_err(located)?
    };
    config.validate(2)?;
    Ok((config, warnings))
}

const TOP_FIELDS: &[&str] = &["rank", "endos", "caps", "marking_maps", "seed", "diagnostics"];
const CAP_FIELDS: &[&str] = &[
    "pullback",
    "disjointness",
    "expansion",
    "audit_loops",
    "audit_loop_length",
    "expansion_loops",
    "expansion_loop_length",
    "rho_max",
];

fn strip_unknown(value: &mut serde_json::Value, warnings: &mut Vec<String>) {
    let Some(obj) = value.as_object_mut() else {
        return;
    };
    obj.retain(|k, _| {
        let keep = TOP_FIELDS.contains(&k.as_str());
        if !keep {
            warnings.push(format!("ignoring unknown field `{k}`"));
        }
        keep
    });
    if let Some(caps) = obj.get_mut("caps").and_then(|c| c.as_object_mut()) {
        caps.retain(|k, _| {
            let keep = CAP_FIELDS.contains(&k.as_str());
            if !keep {
                warnings.push(format!("ignoring unknown field `caps.{k}`"));
            }
            keep
        });
    }
}
