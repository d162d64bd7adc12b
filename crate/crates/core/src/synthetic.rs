//! Generated review corpora that are separable by construction. Every review
//! follows one template and blames some factor; unfair reviews pick it from
//! a market-specific list of things outside the worker's control, fair ones
//! from things the worker controls. Used to smoke-test training and for the
//! demo CLI workflow.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::corpus::{Label, LabeledReview};
use crate::seed;

pub struct MarketProfile {
    pub market: &'static str,
    pub worker: &'static [&'static str],
    /// Factors outside the worker's control.
    pub triggers: &'static [&'static str],
    /// Factors the worker controls.
    pub own_faults: &'static [&'static str],
}

pub const MARKETS: [MarketProfile; 3] = [
    MarketProfile {
        market: "uber",
        worker: &["driver", "chauffeur"],
        triggers: &["traffic", "congestion", "roadwork", "surge", "storm", "weather"],
        own_faults: &["rudeness", "speeding", "smoking", "attitude", "phone", "music"],
    },
    MarketProfile {
        market: "grubhub",
        worker: &["courier", "delivery person"],
        triggers: &["restaurant", "kitchen", "ingredient", "chef", "menu", "recipe"],
        own_faults: &["carelessness", "attitude", "spill", "rudeness", "laziness", "manners"],
    },
    MarketProfile {
        market: "upwork",
        worker: &["freelancer", "translator"],
        triggers: &["glitch", "outage", "server", "crash", "bug", "downtime"],
        own_faults: &["mistakes", "typos", "rudeness", "silence", "attitude", "sloppiness"],
    },
];

const TRAITS: &[&str] = &[
    "rude",
    "polite",
    "careless",
    "friendly",
    "sloppy",
    "professional",
    "slow",
    "helpful",
    "quiet",
    "attentive",
    "unprepared",
    "punctual",
    "dismissive",
    "courteous",
];
const OPENERS: &[&str] = &["honestly", "overall", "well", "sadly", "frankly", "today", "again"];
const BLAME: &[&str] = &["but because of the", "and thanks to the", "but due to the", "and then the"];
const RATINGS: &[&str] = &["one star", "two stars", "zero stars", "low rating", "never again"];

pub fn profile(market: &str) -> Option<&'static MarketProfile> {
    MARKETS.iter().find(|m| m.market == market)
}

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).copied().expect("nonempty word list")
}

/// `n` reviews for `profile`, the first `round(n · unfair_fraction)` of the
/// generated sequence unfair, then shuffled into a seeded order.
pub fn generate(profile: &MarketProfile, n: usize, unfair_fraction: f64, seed_value: u64) -> Vec<LabeledReview> {
    let mut rng = seed::rng(seed::derive(seed_value, &["synthetic", profile.market]));
    let n_unfair = ((n as f64) * unfair_fraction.clamp(0.0, 1.0)).round() as usize;
    let mut labels: Vec<Label> = (0..n).map(|i| if i < n_unfair { Label::Unfair } else { Label::Fair }).collect();
    rand::seq::SliceRandom::shuffle(labels.as_mut_slice(), &mut rng);
    labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let worker = pick(&mut rng, profile.worker);
            let factor = match label {
                Label::Unfair => pick(&mut rng, profile.triggers),
                Label::Fair => pick(&mut rng, profile.own_faults),
            };
            let text = format!(
                "{} the {} was {} {} {} so {}",
                pick(&mut rng, OPENERS),
                worker,
                pick(&mut rng, TRAITS),
                pick(&mut rng, BLAME),
                factor,
                pick(&mut rng, RATINGS),
            );
            LabeledReview {
                id: format!("{}-{i:05}", profile.market),
                market: profile.market.to_string(),
                text,
                coders: vec![label, label],
                label: Some(label),
            }
        })
        .collect()
}

/// Balanced corpora of `per_market` reviews for every built-in market.
pub fn all_markets(per_market: usize, seed_value: u64) -> Vec<(&'static str, Vec<LabeledReview>)> {
    MARKETS.iter().map(|p| (p.market, generate(p, per_market, 0.5, seed_value))).collect()
}
