//! Interaction sets: which (source, gate) products count as inside the phrase.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Origin of a summand or state part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PartClass {
    Beta,
    Gamma,
    Bias,
}

impl PartClass {
    pub const ALL: [PartClass; 3] = [PartClass::Beta, PartClass::Gamma, PartClass::Bias];

    pub fn name(self) -> &'static str {
        match self {
            PartClass::Beta => "beta",
            PartClass::Gamma => "gamma",
            PartClass::Bias => "bias",
        }
    }
}

impl FromStr for PartClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "beta" | "b" | "β" => Ok(PartClass::Beta),
            "gamma" | "g" | "γ" => Ok(PartClass::Gamma),
            "bias" | "intercept" => Ok(PartClass::Bias),
            other => Err(Error::Interactions(format!("unknown part class \"{other}\""))),
        }
    }
}

/// Where layer-0 input embeddings are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputTokenClass {
    /// Inside when the timestep is in focus, outside otherwise.
    ByPhraseMembership,
    AlwaysGamma,
}

/// Side that receives the initial hidden and cell states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStatesClass {
    Gamma,
    Beta,
}

/// A product of a gate contribution with a source part, keyed `(source, gate)`.
/// The gate is the sigmoid factor; the source is the multiplied state
/// (`c_{t-1}`, the candidate, or `tanh(c_t)`).
pub type Interaction = (PartClass, PartClass);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionSet {
    pub pairs: BTreeSet<Interaction>,
    /// `(bias, bias)` products are inside only at timesteps in focus.
    pub bias_bias_only_in_phrase: bool,
    pub input_token_class: InputTokenClass,
    pub init_states_class: InitStatesClass,
}

use PartClass::{Beta as B, Bias as I, Gamma as G};

impl InteractionSet {
    pub fn new(
        pairs: impl IntoIterator<Item = Interaction>,
        bias_bias_only_in_phrase: bool,
        input_token_class: InputTokenClass,
        init_states_class: InitStatesClass,
    ) -> Self {
        InteractionSet {
            pairs: pairs.into_iter().collect(),
            bias_bias_only_in_phrase,
            input_token_class,
            init_states_class,
        }
    }

    /// `{β-β, β-b}`: the original contextual decomposition.
    pub fn default_set() -> Self {
        Self::new(
            [(B, B), (B, I), (I, B)],
            false,
            InputTokenClass::ByPhraseMembership,
            InitStatesClass::Gamma,
        )
    }

    /// `{β-β, β-b, β-γ*, b-b∈x}`.
    pub fn inside() -> Self {
        Self::new(
            [(B, B), (B, I), (I, B), (B, G), (I, I)],
            true,
            InputTokenClass::ByPhraseMembership,
            InitStatesClass::Gamma,
        )
    }

    /// `{β-β, β-γ*, β-b, b-b}` with inputs always outside and the initial
    /// states inside: isolates what the intercepts contribute.
    pub fn intercept_star() -> Self {
        Self::new(
            [(B, B), (B, G), (B, I), (I, B), (I, I)],
            false,
            InputTokenClass::AlwaysGamma,
            InitStatesClass::Beta,
        )
    }

    /// `{β-β, β-γ*}`: never counts an intercept interaction.
    pub fn no_intercept() -> Self {
        Self::new(
            [(B, B), (B, G)],
            false,
            InputTokenClass::ByPhraseMembership,
            InitStatesClass::Gamma,
        )
    }

    /// Every product inside, unconditionally, with the initial states inside.
    /// With the whole sentence in focus the outside part stays empty.
    pub fn everything() -> Self {
        Self::new(
            PartClass::ALL
                .iter()
                .flat_map(|&s| PartClass::ALL.iter().map(move |&g| (s, g))),
            false,
            InputTokenClass::ByPhraseMembership,
            InitStatesClass::Beta,
        )
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "default" => Ok(Self::default_set()),
            "in" => Ok(Self::inside()),
            "intercept*" | "intercept" | "intercept-star" => Ok(Self::intercept_star()),
            "no-intercept" | "¬intercept" | "not-intercept" => Ok(Self::no_intercept()),
            "all" => Ok(Self::everything()),
            other => Err(Error::Interactions(format!(
                "unknown preset \"{other}\" (expected default, in, intercept*, no-intercept, all)"
            ))),
        }
    }

    /// Parses an inline pair list such as `beta:beta,beta:gamma,bias:bias`
    /// (each entry `source:gate`). Flags keep the defaults of the original set.
    pub fn parse_pairs(list: &str) -> Result<BTreeSet<Interaction>> {
        list.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|entry| {
                let (s, g) = entry.split_once(':').ok_or_else(|| {
                    Error::Interactions(format!("pair \"{entry}\" is not of the form source:gate"))
                })?;
                Ok((s.parse()?, g.parse()?))
            })
            .collect()
    }

    pub fn contains(&self, source: PartClass, gate: PartClass) -> bool {
        self.pairs.contains(&(source, gate))
    }

    /// Whether the product of `source` and `gate` goes to the inside part at a
    /// timestep whose focus membership is `in_focus`.
    pub fn routes_inside(&self, source: PartClass, gate: PartClass, in_focus: bool) -> bool {
        if !self.contains(source, gate) {
            return false;
        }
        if source == PartClass::Bias && gate == PartClass::Bias && self.bias_bias_only_in_phrase {
            return in_focus;
        }
        true
    }

    /// Short label for result tables.
    pub fn label(&self) -> String {
        for (name, preset) in [
            ("default", Self::default_set()),
            ("in", Self::inside()),
            ("intercept*", Self::intercept_star()),
            ("no-intercept", Self::no_intercept()),
            ("all", Self::everything()),
        ] {
            if *self == preset {
                return name.to_string();
            }
        }
        self.to_string()
    }
}

impl fmt::Display for InteractionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pairs: Vec<String> = self
            .pairs
            .iter()
            .map(|(s, g)| format!("{}:{}", s.name(), g.name()))
            .collect();
        write!(f, "{{{}}}", pairs.join(","))?;
        if self.bias_bias_only_in_phrase {
            write!(f, "+bb-in-phrase")?;
        }
        if self.input_token_class == InputTokenClass::AlwaysGamma {
            write!(f, "+input-outside")?;
        }
        if self.init_states_class == InitStatesClass::Beta {
            write!(f, "+init-inside")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_has_five_cell_products() {
        // Cell products: forget gate x {β,γ} previous cell, input gate x {β,γ,b} candidate.
        let set = InteractionSet::default_set();
        let forget = [B, G]
            .iter()
            .flat_map(|&s| PartClass::ALL.iter().map(move |&g| (s, g)))
            .filter(|&(s, g)| set.routes_inside(s, g, true))
            .count();
        let input = PartClass::ALL
            .iter()
            .flat_map(|&s| PartClass::ALL.iter().map(move |&g| (s, g)))
            .filter(|&(s, g)| set.routes_inside(s, g, true))
            .count();
        assert_eq!(forget + input, 5);
    }

    #[test]
    fn bias_bias_respects_focus_flag() {
        let set = InteractionSet::inside();
        assert!(set.routes_inside(I, I, true));
        assert!(!set.routes_inside(I, I, false));
        let star = InteractionSet::intercept_star();
        assert!(star.routes_inside(I, I, false));
        assert!(!InteractionSet::no_intercept().routes_inside(I, I, true));
    }

    #[test]
    fn presets_and_labels() {
        for name in ["default", "in", "intercept*", "no-intercept", "all"] {
            assert_eq!(InteractionSet::preset(name).unwrap().label(), name);
        }
        assert!(InteractionSet::preset("bogus").is_err());
    }

    #[test]
    fn inline_pairs() {
        let pairs = InteractionSet::parse_pairs("beta:beta, beta:gamma,bias:bias").unwrap();
        assert_eq!(pairs.len(), 3);
        assert!(pairs.contains(&(B, G)));
        assert!(InteractionSet::parse_pairs("beta-gamma").is_err());
        assert!(InteractionSet::parse_pairs("beta:delta").is_err());
    }
}
