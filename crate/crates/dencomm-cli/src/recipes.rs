//! Built-in, versioned experiment configs. Names are a stable contract:
//! scripts may refer to them across patch releases.

pub struct Recipe {
    pub name: &'static str,
    pub summary: &'static str,
    pub toml: &'static str,
}

pub const RECIPES: &[Recipe] = &[
    Recipe {
        name: "fig5a-wiring-2d",
        summary: "EMST wiring cost, unit square, D=1024, K in {1,4,16,64}",
        toml: include_str!("../recipes/fig5a-wiring-2d.toml"),
    },
    Recipe {
        name: "fig5b-wiring-3d",
        summary: "EMST wiring cost, unit cube, D=1024, K in {1,4,16,64}",
        toml: include_str!("../recipes/fig5b-wiring-3d.toml"),
    },
    Recipe {
        name: "fig5c-eta-map",
        summary: "dense PE-mesh cost map and eta ratio over a (D,K) grid",
        toml: include_str!("../recipes/fig5c-eta-map.toml"),
    },
    Recipe {
        name: "fig5d-sparse-mesh",
        summary: "sparse delivery cost at D=256 with the K^-1/2 slope fit",
        toml: include_str!("../recipes/fig5d-sparse-mesh.toml"),
    },
    Recipe {
        name: "table-b1-complexity",
        summary: "ResNet-18 parameter/MAC table across dendritic variants",
        toml: include_str!("../recipes/table-b1-complexity.toml"),
    },
    Recipe {
        name: "fig2-memory-constants",
        summary: "stored-activation bit counts for the worked layer example",
        toml: include_str!("../recipes/fig2-memory-constants.toml"),
    },
    Recipe {
        name: "gemm-cache-sweep",
        summary: "tiled-GEMM global-memory traffic vs dendrite count",
        toml: include_str!("../recipes/gemm-cache-sweep.toml"),
    },
    Recipe {
        name: "toy-train-parity",
        summary: "equal-parameter point vs K=4 dendritic MLP training",
        toml: include_str!("../recipes/toy-train-parity.toml"),
    },
    Recipe {
        name: "entropy-verify",
        summary: "randomized sum-entropy identity verification",
        toml: include_str!("../recipes/entropy-verify.toml"),
    },
];

pub fn find(name: &str) -> Option<&'static Recipe> {
    RECIPES.iter().find(|r| r.name == name)
}

pub fn catalog() -> String {
    let mut out = String::from("available recipes:\n");
    for r in RECIPES {
        out.push_str(&format!("  {:24} {}\n", r.name, r.summary));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    #[test]
    fn catalog_has_stable_names() {
        let names: Vec<&str> = RECIPES.iter().map(|r| r.name).collect();
        assert_eq!(
            names,
            vec![
                "fig5a-wiring-2d",
                "fig5b-wiring-3d",
                "fig5c-eta-map",
                "fig5d-sparse-mesh",
                "table-b1-complexity",
                "fig2-memory-constants",
                "gemm-cache-sweep",
                "toy-train-parity",
                "entropy-verify",
            ]
        );
        assert!(names.len() >= 6);
    }

    #[test]
    fn every_recipe_parses_and_validates() {
        for r in RECIPES {
            let config = ExperimentConfig::from_toml(r.toml)
                .unwrap_or_else(|e| panic!("recipe {}: {e}", r.name));
            assert_eq!(config.name.as_deref(), Some(r.name));
        }
    }

    #[test]
    fn configs_round_trip_losslessly() {
        for r in RECIPES {
            let a = ExperimentConfig::from_toml(r.toml).unwrap();
            let b = ExperimentConfig::from_toml(&a.to_toml()).unwrap();
            assert_eq!(a, b, "recipe {} does not round-trip", r.name);
        }
    }
}
