//! Named generators reachable from `sppt generate`.

use sppt::states::{self, GeneratedState, SKind};

use crate::Failure;

/// Generator parameters as given on the command line; unset ones take per-generator defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    pub b: Option<f64>,
    pub dims: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub kind: Option<SKind>,
    pub rank: Option<usize>,
}

impl Params {
    fn given(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.b.is_some() {
            out.push("b");
        }
        if self.dims.is_some() {
            out.push("dims");
        }
        if self.seed.is_some() {
            out.push("seed");
        }
        if self.n.is_some() {
            out.push("n");
        }
        if self.d.is_some() {
            out.push("d");
        }
        if self.kind.is_some() {
            out.push("kind");
        }
        if self.rank.is_some() {
            out.push("rank");
        }
        out
    }

    fn dims_or(&self, default: &[usize]) -> Vec<usize> {
        self.dims.clone().unwrap_or_else(|| default.to_vec())
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

pub struct Entry {
    pub name: &'static str,
    pub params: &'static [&'static str],
    pub summary: &'static str,
    build: fn(&Params) -> sppt::Result<GeneratedState>,
}

pub const REGISTRY: &[Entry] = &[
    Entry {
        name: "ha",
        params: &["b"],
        summary: "2⊗5 SPPT entangled state (b in (0,1), default 0.5)",
        build: |p| states::ha_state(p.b.unwrap_or(0.5)),
    },
    Entry {
        name: "yuzhao",
        params: &[],
        summary: "2⊗2⊗2 state that is SSPPT only under the legacy tripartite definition",
        build: |_| states::yuzhao_counterexample(),
    },
    Entry {
        name: "cq",
        params: &["dims", "seed"],
        summary: "random classical-quantum state (default dims 2,3)",
        build: |p| states::random_cq_state(&p.dims_or(&[2, 3]), p.seed()),
    },
    Entry {
        name: "canonical-22n",
        params: &["n", "seed"],
        summary: "2⊗2⊗N canonical-form state with commuting normal B, C (default N 3)",
        build: |p| states::random_canonical_22n(p.n.unwrap_or(3), p.seed()),
    },
    Entry {
        name: "canonical-multipartite",
        params: &["dims", "seed"],
        summary: "canonical-form state from commuting normal families (default dims 2,2,3)",
        build: |p| states::random_canonical_multipartite(&p.dims_or(&[2, 2, 3]), p.seed()),
    },
    Entry {
        name: "pure-product",
        params: &["dims", "seed"],
        summary: "random pure product state (default dims 2,3)",
        build: |p| states::random_pure_product(&p.dims_or(&[2, 3]), p.seed()),
    },
    Entry {
        name: "bell",
        params: &[],
        summary: "Bell state on 2⊗2",
        build: |_| states::bell(),
    },
    Entry {
        name: "ghz",
        params: &["n"],
        summary: "GHZ state on n qubits (default 3)",
        build: |p| states::ghz(p.n.unwrap_or(3)),
    },
    Entry {
        name: "maximally-mixed",
        params: &["dims"],
        summary: "identity over the dimension (default dims 2,2)",
        build: |p| states::maximally_mixed(&p.dims_or(&[2, 2])),
    },
    Entry {
        name: "random-ssppt",
        params: &["dims", "seed"],
        summary: "random SSPPT state with commuting normal S families (default dims 2,2,3)",
        build: |p| states::random_ssppt(&p.dims_or(&[2, 2, 3]), p.seed()),
    },
    Entry {
        name: "random-sppt-2xd",
        params: &["d", "kind", "rank", "seed"],
        summary: "2⊗d SPPT state with contractive or normal S (default d 4, contractive, rank d)",
        build: |p| {
            let d = p.d.unwrap_or(4);
            states::random_sppt_2xd(
                d,
                p.kind.unwrap_or(SKind::Contractive),
                p.rank.unwrap_or(d),
                p.seed(),
            )
        },
    },
    Entry {
        name: "a-greater-d",
        params: &["d", "seed"],
        summary: "2⊗d state with A − D positive definite (default d 4)",
        build: |p| states::random_a_greater_d(p.d.unwrap_or(4), p.seed()),
    },
];

pub fn lookup(name: &str) -> Option<&'static Entry> {
    REGISTRY.iter().find(|e| e.name == name)
}

pub fn generate(name: &str, params: &Params) -> Result<GeneratedState, Failure> {
    let entry = lookup(name).ok_or_else(|| {
        let names: Vec<&str> = REGISTRY.iter().map(|e| e.name).collect();
        Failure::Other(format!(
            "unknown generator {name:?}; known: {}",
            names.join(", ")
        ))
    })?;
    let extra: Vec<&str> = params
        .given()
        .into_iter()
        .filter(|p| !entry.params.contains(p))
        .collect();
    if !extra.is_empty() {
        return Err(Failure::Other(format!(
            "generator {name} does not take {}; it accepts [{}]",
            extra.join(", "),
            entry.params.join(", ")
        )));
    }
    (entry.build)(params).map_err(|e| Failure::Other(format!("{name}: {e}")))
}
