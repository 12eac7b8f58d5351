//! Elections and manipulation by voter control or bribery.
//!
//! The approval problems become multicover instances whose elements are the
//! candidates and whose requirements are score gaps to the distinguished
//! candidate `p` (always candidate 0). Scoring-rule deletion becomes an eMIP
//! with one counter per distinct ranking.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covering::{
    self, with_cost_objective, CoverError, CoverInstance, CoverSolution, Outcome,
};
use crate::emip::{EmipConstraint, EmipModel};
use crate::io::{read_document, InputError};
use crate::milp::{SolveStats, Solver, VarKind};
use crate::pwl::PwlFunction;
use crate::rational::int;
use crate::reduction::{solve_emip, EmipStatus, ReductionError};

pub const FORMAT: &str = "election-v1";

pub const DEFAULT_SCORING_CAP: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApprovalVoter {
    pub approves: BTreeSet<usize>,
    pub weight: u64,
    pub price: u64,
}

impl ApprovalVoter {
    pub fn new(approves: impl IntoIterator<Item = usize>) -> Self {
        Self {
            approves: approves.into_iter().collect(),
            weight: 1,
            price: 1,
        }
    }

    pub fn with_weight(mut self, weight: u64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_price(mut self, price: u64) -> Self {
        self.price = price;
        self
    }

    pub fn approves_p(&self) -> bool {
        self.approves.contains(&0)
    }
}

/// Approval election; candidate 0 is `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApprovalElection {
    pub candidates: Vec<String>,
    pub voters: Vec<ApprovalVoter>,
    /// Voters that may be added (CCAV).
    pub addable: Vec<ApprovalVoter>,
    pub budget: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedVoter {
    /// Candidates from most to least preferred.
    pub ranking: Vec<usize>,
    pub price: u64,
}

/// Election under a positional scoring rule; candidate 0 is `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrdinalElection {
    pub candidates: Vec<String>,
    pub voters: Vec<RankedVoter>,
    /// Points per position, best position first, nonincreasing.
    pub scoring: Vec<i64>,
    pub budget: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Election {
    Approval(ApprovalElection),
    Ordinal(OrdinalElection),
}

/// What the manipulator does. Bribed voters end up approving only `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "voters")]
pub enum Action {
    Delete(Vec<usize>),
    Add(Vec<usize>),
    Bribe(Vec<usize>),
}

impl Action {
    pub fn voters(&self) -> &[usize] {
        match self {
            Action::Delete(v) | Action::Add(v) | Action::Bribe(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManipulationResult {
    pub feasible: bool,
    /// Empty when infeasible.
    pub action: Action,
    pub cost: u64,
    #[serde(skip)]
    pub stats: SolveStats,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VotingOptions {
    /// Require `p` to beat every rival strictly.
    pub unique_winner: bool,
    /// Return a cheapest action rather than any action within budget.
    pub minimize_cost: bool,
    /// Largest number of candidates accepted by scoring-rule deletion.
    pub scoring_cap: usize,
}

impl Default for VotingOptions {
    fn default() -> Self {
        Self {
            unique_winner: false,
            minimize_cost: false,
            scoring_cap: DEFAULT_SCORING_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VotingError {
    #[error("invalid election: {0}")]
    Invalid(String),
    #[error("voter {voter} has weight {weight}; this problem needs unit weights")]
    NonUnitWeight { voter: usize, weight: u64 },
    #[error("voter {voter} has price {price}; this problem needs unit prices")]
    NonUnitPrice { voter: usize, price: u64 },
    #[error("{candidates} candidates exceed the scoring-rule cap of {cap}")]
    TooManyCandidates { candidates: usize, cap: usize },
    #[error("action does not make p a winner: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}

/// Weighted approval counts of the current voters.
pub fn approval_score(e: &ApprovalElection) -> Vec<u64> {
    scores_of(e.candidates.len(), e.voters.iter())
}

fn scores_of<'a>(m: usize, voters: impl Iterator<Item = &'a ApprovalVoter>) -> Vec<u64> {
    let mut scores = vec![0; m];
    for v in voters {
        for &c in &v.approves {
            scores[c] += v.weight;
        }
    }
    scores
}

fn wins<T: Ord>(scores: &[T], unique: bool) -> bool {
    scores[1..].iter().all(|s| {
        if unique {
            *s < scores[0]
        } else {
            *s <= scores[0]
        }
    })
}

/// Coverage still needed against a rival with score `rival` when `p` has `target`.
fn gap(rival: u64, target: u64, unique: bool) -> u64 {
    (rival + u64::from(unique)).saturating_sub(target)
}

impl ApprovalElection {
    pub fn new(candidates: Vec<String>, voters: Vec<ApprovalVoter>, budget: u64) -> Self {
        Self {
            candidates,
            voters,
            addable: Vec::new(),
            budget,
        }
    }

    /// Election with candidates named `p`, `c1`, `c2`, ...
    pub fn with_candidates(m: usize, voters: Vec<ApprovalVoter>, budget: u64) -> Self {
        Self::new(default_names(m), voters, budget)
    }

    pub fn validate(&self) -> Result<(), VotingError> {
        let m = self.candidates.len();
        if m == 0 {
            return Err(VotingError::Invalid("no candidates".into()));
        }
        if m > covering::MAX_UNIVERSE {
            return Err(VotingError::Invalid(format!(
                "{m} candidates exceed {}",
                covering::MAX_UNIVERSE
            )));
        }
        for (i, v) in self.voters.iter().chain(&self.addable).enumerate() {
            if let Some(c) = v.approves.iter().find(|c| **c >= m) {
                return Err(VotingError::Invalid(format!(
                    "voter {i} approves unknown candidate {c}"
                )));
            }
        }
        Ok(())
    }

    /// True if some voter (current or addable) has a weight other than 1.
    pub fn is_weighted(&self) -> bool {
        self.voters
            .iter()
            .chain(&self.addable)
            .any(|v| v.weight != 1)
    }

    /// Scores after `action`.
    pub fn scores_after(&self, action: &Action) -> Vec<u64> {
        let m = self.candidates.len();
        match action {
            Action::Delete(gone) => {
                let gone: BTreeSet<_> = gone.iter().collect();
                scores_of(
                    m,
                    self.voters
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| !gone.contains(i))
                        .map(|(_, v)| v),
                )
            }
            Action::Add(added) => scores_of(
                m,
                self.voters
                    .iter()
                    .chain(added.iter().map(|&i| &self.addable[i])),
            ),
            Action::Bribe(bribed) => {
                let bribed: BTreeSet<_> = bribed.iter().collect();
                let p_only: Vec<ApprovalVoter> = self
                    .voters
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        if bribed.contains(&i) {
                            ApprovalVoter {
                                approves: [0].into_iter().collect(),
                                ..v.clone()
                            }
                        } else {
                            v.clone()
                        }
                    })
                    .collect();
                scores_of(m, p_only.iter())
            }
        }
    }

    pub fn action_cost(&self, action: &Action) -> u64 {
        let pool = match action {
            Action::Add(_) => &self.addable,
            _ => &self.voters,
        };
        action.voters().iter().map(|&i| pool[i].price).sum()
    }

    fn require_unit_weights(&self, voters: &[ApprovalVoter]) -> Result<(), VotingError> {
        match voters.iter().position(|v| v.weight != 1) {
            Some(voter) => Err(VotingError::NonUnitWeight {
                voter,
                weight: voters[voter].weight,
            }),
            None => Ok(()),
        }
    }

    fn require_unit_prices(&self, voters: &[ApprovalVoter]) -> Result<(), VotingError> {
        match voters.iter().position(|v| v.price != 1) {
            Some(voter) => Err(VotingError::NonUnitPrice {
                voter,
                price: voters[voter].price,
            }),
            None => Ok(()),
        }
    }

    /// Checks that `action` is affordable and makes `p` win, then packages it.
    fn finish(
        &self,
        action: Option<Action>,
        stats: SolveStats,
        options: &VotingOptions,
    ) -> Result<ManipulationResult, VotingError> {
        let Some(action) = action else {
            return Ok(ManipulationResult {
                feasible: false,
                action: Action::Delete(Vec::new()),
                cost: 0,
                stats,
            });
        };
        let cost = self.action_cost(&action);
        if cost > self.budget {
            return Err(VotingError::Inconsistent(format!(
                "cost {cost} exceeds budget {}",
                self.budget
            )));
        }
        if !wins(&self.scores_after(&action), options.unique_winner) {
            return Err(VotingError::Inconsistent(format!("{action:?}")));
        }
        Ok(ManipulationResult {
            feasible: true,
            action,
            cost,
            stats,
        })
    }

    fn already_wins(&self, options: &VotingOptions) -> bool {
        wins(&approval_score(self), options.unique_winner)
    }

    pub fn to_json(&self) -> String {
        let doc = ElectionDoc {
            format: FORMAT.into(),
            p: self.candidates[0].clone(),
            candidates: self.candidates.clone(),
            voters: self
                .voters
                .iter()
                .map(|v| approval_doc(v, &self.candidates))
                .collect(),
            addable: self
                .addable
                .iter()
                .map(|v| approval_doc(v, &self.candidates))
                .collect(),
            budget: self.budget,
            rule: RuleDoc::Approval,
        };
        serde_json::to_string_pretty(&doc).expect("election serializes")
    }
}

impl OrdinalElection {
    pub fn new(
        candidates: Vec<String>,
        voters: Vec<RankedVoter>,
        scoring: Vec<i64>,
        budget: u64,
    ) -> Self {
        Self {
            candidates,
            voters,
            scoring,
            budget,
        }
    }

    pub fn with_candidates(
        m: usize,
        voters: Vec<RankedVoter>,
        scoring: Vec<i64>,
        budget: u64,
    ) -> Self {
        Self::new(default_names(m), voters, scoring, budget)
    }

    pub fn validate(&self) -> Result<(), VotingError> {
        let m = self.candidates.len();
        if m == 0 {
            return Err(VotingError::Invalid("no candidates".into()));
        }
        if self.scoring.len() != m {
            return Err(VotingError::Invalid(format!(
                "scoring vector has {} entries for {m} candidates",
                self.scoring.len()
            )));
        }
        if self.scoring.windows(2).any(|w| w[0] < w[1]) {
            return Err(VotingError::Invalid(
                "scoring vector must be nonincreasing".into(),
            ));
        }
        for (i, v) in self.voters.iter().enumerate() {
            let mut seen = v.ranking.clone();
            seen.sort_unstable();
            if seen != (0..m).collect::<Vec<_>>() {
                return Err(VotingError::Invalid(format!(
                    "voter {i}: ranking is not a permutation"
                )));
            }
        }
        Ok(())
    }

    pub fn scores_without(&self, deleted: &[usize]) -> Vec<i64> {
        let gone: BTreeSet<_> = deleted.iter().collect();
        let mut scores = vec![0; self.candidates.len()];
        for (_, v) in self
            .voters
            .iter()
            .enumerate()
            .filter(|(i, _)| !gone.contains(i))
        {
            for (pos, &c) in v.ranking.iter().enumerate() {
                scores[c] += self.scoring[pos];
            }
        }
        scores
    }

    pub fn to_json(&self) -> String {
        let doc = ElectionDoc {
            format: FORMAT.into(),
            p: self.candidates[0].clone(),
            candidates: self.candidates.clone(),
            voters: self
                .voters
                .iter()
                .map(|v| VoterDoc {
                    approves: None,
                    ranking: Some(
                        v.ranking
                            .iter()
                            .map(|&c| self.candidates[c].clone())
                            .collect(),
                    ),
                    weight: 1,
                    price: v.price,
                })
                .collect(),
            addable: Vec::new(),
            budget: self.budget,
            rule: RuleDoc::Scoring(self.scoring.clone()),
        };
        serde_json::to_string_pretty(&doc).expect("election serializes")
    }
}

fn default_names(m: usize) -> Vec<String> {
    std::iter::once("p".to_string())
        .chain((1..m).map(|i| format!("c{i}")))
        .collect()
}

fn chosen_origins(solution: &CoverSolution, origins: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = solution.chosen.iter().map(|&j| origins[j]).collect();
    out.sort_unstable();
    out
}

/// Rival `c ≥ 1` is element `c − 1`.
fn rival_set(candidates: impl Iterator<Item = usize>, multiplicity: u64) -> BTreeMap<usize, u64> {
    if multiplicity == 0 {
        return BTreeMap::new();
    }
    candidates
        .filter(|&c| c != 0)
        .map(|c| (c - 1, multiplicity))
        .collect()
}

fn run_wsm(
    instance: &CoverInstance,
    options: &VotingOptions,
    solver: &Solver,
) -> Result<Outcome<CoverSolution>, CoverError> {
    if options.minimize_cost {
        covering::solve_wsm_min_cost(instance, solver)
    } else {
        covering::solve_wsm(instance, solver)
    }
}

fn run_umm(
    instance: &CoverInstance,
    options: &VotingOptions,
    solver: &Solver,
) -> Result<Outcome<CoverSolution>, CoverError> {
    if options.minimize_cost {
        covering::solve_umm_min_cost(instance, solver)
    } else {
        covering::solve_umm(instance, solver)
    }
}

fn empty_action(kind: fn(Vec<usize>) -> Action) -> Option<Action> {
    Some(kind(Vec::new()))
}

/// Rival deficits against `p`'s current score.
fn deficits(e: &ApprovalElection, options: &VotingOptions) -> Vec<u64> {
    let scores = approval_score(e);
    scores[1..]
        .iter()
        .map(|&s| gap(s, scores[0], options.unique_winner))
        .collect()
}

#[derive(Clone, Copy)]
enum Control {
    Delete,
    Add,
}

/// Deleting (adding) voters as a multicover: only voters not approving `p`
/// (approving `p`) are candidates; each covers the rivals it approves (does
/// not approve) with multiplicity `weight` when `weighted`, else 1.
fn control_instance(
    e: &ApprovalElection,
    control: Control,
    weighted: bool,
    options: &VotingOptions,
) -> (CoverInstance, Vec<usize>) {
    let m = e.candidates.len();
    let (pool, useful): (&[ApprovalVoter], fn(&ApprovalVoter) -> bool) = match control {
        Control::Delete => (&e.voters, |v| !v.approves_p()),
        Control::Add => (&e.addable, ApprovalVoter::approves_p),
    };
    let origins: Vec<usize> = (0..pool.len()).filter(|&i| useful(&pool[i])).collect();
    let sets = origins
        .iter()
        .map(|&i| {
            let v = &pool[i];
            let mult = if weighted { v.weight } else { 1 };
            match control {
                Control::Delete => rival_set(v.approves.iter().copied(), mult),
                Control::Add => rival_set((1..m).filter(|c| !v.approves.contains(c)), mult),
            }
        })
        .collect();
    let weights = origins
        .iter()
        .map(|&i| if weighted { 1 } else { pool[i].price })
        .collect();
    let instance =
        CoverInstance::new(m - 1, sets, deficits(e, options), e.budget).with_weights(weights);
    (instance, origins)
}

fn solve_control(
    e: &ApprovalElection,
    control: Control,
    weighted: bool,
    options: &VotingOptions,
    solver: &Solver,
) -> Result<ManipulationResult, VotingError> {
    e.validate()?;
    let pool = match control {
        Control::Delete => &e.voters,
        Control::Add => &e.addable,
    };
    if weighted {
        e.require_unit_prices(pool)?;
    } else {
        e.require_unit_weights(&e.voters)?;
        e.require_unit_weights(&e.addable)?;
    }
    let kind: fn(Vec<usize>) -> Action = match control {
        Control::Delete => Action::Delete,
        Control::Add => Action::Add,
    };
    if e.already_wins(options) {
        return e.finish(empty_action(kind), SolveStats::default(), options);
    }
    let (instance, origins) = control_instance(e, control, weighted, options);
    let outcome = if weighted {
        run_umm(&instance, options, solver)?
    } else {
        run_wsm(&instance, options, solver)?
    };
    let action = outcome.solution.map(|s| kind(chosen_origins(&s, &origins)));
    e.finish(action, outcome.stats, options)
}

/// Priced constructive control by deleting voters (unit weights).
pub fn solve_ccdv_priced(
    e: &ApprovalElection,
    options: &VotingOptions,
    solver: &Solver,
) -> Result<ManipulationResult, VotingError> {
    solve_control(e, Control::Delete, false, options, solver)
}

/// Priced constructive control by adding voters (unit weights).
pub fn solve_ccav_priced(
    e: &ApprovalElection,
    options: &VotingOptions,
    solver: &Solver,
) -> Result<ManipulationResult, VotingError> {
    solve_control(e, Control::Add, false, options, solver)
}

/// Weighted deletion (unit prices); the budget counts deleted voters.
pub fn solve_ccdv_weighted(
    e: &ApprovalElection,
    options: &VotingOptions,
    solver: &Solver,
) -> Result<ManipulationResult, VotingError> {
    solve_control(e, Control::Delete, true, options, solver)
}

/// Weighted addition (unit prices); the budget counts added voters.
pub fn solve_ccav_weighted(
    e: &ApprovalElection,
    options: &VotingOptions,
    solver: &Solver,
) -> Result<ManipulationResult, VotingError> {
    solve_control(e, Control::Add, true, options, solver)
}

/// Priced bribery (unit weights). Each bribed voter ends up approving only `p`.
///
/// For every number `ℓ` of approvals gained by `p`, bribing is a WSM instance:
/// element 0 is `p` with requirement `ℓ`, and rival `c` needs its score cut to
/// `score(p) + ℓ`. A voter covers the rivals it approves, and `p` if it does
/// not approve `p` yet.
pub fn solve_bribery_priced(
    e: &ApprovalElection,
    options: &VotingOptions,
    solver: &Solver,
) -> Result<ManipulationResult, VotingError> {
    e.validate()?;
    e.require_unit_weights(&e.voters)?;
    if e.already_wins(options) {
        return e.finish(empty_action(Action::Bribe), SolveStats::default(), options);
    }
    let m = e.candidates.len();
    let scores = approval_score(e);
    let sets: Vec<BTreeMap<usize, u64>> = e
        .voters
        .iter()
        .map(|v| {
            let mut set: BTreeMap<usize, u64> = v
                .approves
                .iter()
                .filter(|&&c| c != 0)
                .map(|&c| (c, 1))
                .collect();
            if !v.approves_p() {
                set.insert(0, 1);
            }
            set
        })
        .collect();
    let weights: Vec<u64> = e.voters.iter().map(|v| v.price).collect();
    let max_gain = e.voters.iter().filter(|v| !v.approves_p()).count() as u64;

    let mut stats = SolveStats::default();
    let mut best: Option<CoverSolution> = None;
    for ell in 0..=max_gain {
        let target = scores[0] + ell;
        let requirements = std::iter::once(ell)
            .chain(
                scores[1..]
                    .iter()
                    .map(|&s| gap(s, target, options.unique_winner)),
            )
            .collect();
        let instance = CoverInstance::new(m, sets.clone(), requirements, e.budget)
            .with_weights(weights.clone());
        let outcome = run_wsm(&instance, options, solver)?;
        stats += outcome.stats;
        if let Some(s) = outcome.solution {
            if best.as_ref().is_none_or(|b| s.cost < b.cost) {
                best = Some(s);
            }
            if !options.minimize_cost {
                break;
            }
        }
    }
    let action = best.map(|s| Action::Bribe(s.chosen));
    e.finish(action, stats, options)
}

/// Priced deletion under a scoring rule.
///
/// Voters with the same ranking are interchangeable except for price, so one
/// integer `c_σ` per ranking present counts deletions (cheapest first) and the
/// cost is the convex function summing the `c_σ` smallest prices.
pub fn solve_scoring_ccdv(
    e: &OrdinalElection,
    options: &VotingOptions,
    solver: &Solver,
) -> Result<ManipulationResult, VotingError> {
    e.validate()?;
    let m = e.candidates.len();
    if m > options.scoring_cap {
        return Err(VotingError::TooManyCandidates {
            candidates: m,
            cap: options.scoring_cap,
        });
    }
    let finish = |deleted: Option<Vec<usize>>,
                  stats: SolveStats|
     -> Result<ManipulationResult, VotingError> {
        let Some(deleted) = deleted else {
            return Ok(ManipulationResult {
                feasible: false,
                action: Action::Delete(Vec::new()),
                cost: 0,
                stats,
            });
        };
        let cost: u64 = deleted.iter().map(|&i| e.voters[i].price).sum();
        if cost > e.budget || !wins(&e.scores_without(&deleted), options.unique_winner) {
            return Err(VotingError::Inconsistent(format!("deleting {deleted:?}")));
        }
        Ok(ManipulationResult {
            feasible: true,
            action: Action::Delete(deleted),
            cost,
            stats,
        })
    };
    if wins(&e.scores_without(&[]), options.unique_winner) {
        return finish(Some(Vec::new()), SolveStats::default());
    }

    let mut groups: BTreeMap<&[usize], Vec<usize>> = BTreeMap::new();
    for (i, v) in e.voters.iter().enumerate() {
        groups.entry(&v.ranking).or_default().push(i);
    }
    let groups: Vec<(&[usize], Vec<usize>)> = groups
        .into_iter()
        .map(|(ranking, mut members)| {
            members.sort_by_key(|&i| (e.voters[i].price, i));
            (ranking, members)
        })
        .collect();

    let mut model = EmipModel::new();
    let counters: Vec<_> = groups
        .iter()
        .enumerate()
        .map(|(k, (_, members))| {
            model.add_variable(
                format!("c{k}"),
                VarKind::Integer,
                int(0),
                Some(int(members.len() as u64)),
            )
        })
        .collect();
    let position: Vec<HashMap<usize, usize>> = groups
        .iter()
        .map(|(ranking, _)| {
            ranking
                .iter()
                .enumerate()
                .map(|(pos, &c)| (c, pos))
                .collect()
        })
        .collect();
    for c in 1..m {
        // Σ_σ (count_σ − c_σ)·d_σ ≤ −[unique], d_σ = α(σ, c) − α(σ, p)
        let d: Vec<i64> = position
            .iter()
            .map(|pos| e.scoring[pos[&c]] - e.scoring[pos[&0]])
            .collect();
        let base: i64 = groups
            .iter()
            .zip(&d)
            .map(|((_, members), d)| members.len() as i64 * d)
            .sum();
        let terms = counters
            .iter()
            .zip(&d)
            .filter(|(_, d)| **d != 0)
            .map(|(v, d)| (*v, int(-d)));
        model.add_constraint(EmipConstraint::linear_le(
            terms,
            int(-base - i64::from(options.unique_winner)),
        ));
    }
    let mut budget_row = EmipConstraint::new(int(e.budget));
    for ((_, members), var) in groups.iter().zip(&counters) {
        let prices: Vec<i64> = members
            .iter()
            .map(|&i| i64::try_from(e.voters[i].price).expect("price fits in i64"))
            .collect();
        let f = PwlFunction::from_sorted_weights(&prices).expect("prices are nonnegative");
        budget_row = budget_row.with_lhs(*var, f).expect("distinct counters");
    }
    model.add_constraint(budget_row);
    if options.minimize_cost {
        let total: u64 = e.voters.iter().map(|v| v.price).sum();
        let row = model.constraints.len() - 1;
        with_cost_objective(&mut model, row, e.budget.min(total));
    }

    let result = solve_emip(&model, solver)?;
    let deleted = match result.status {
        EmipStatus::Infeasible => None,
        EmipStatus::Feasible { assignment, .. } => {
            let mut deleted = Vec::new();
            for ((_, members), var) in groups.iter().zip(&counters) {
                let k = assignment[var.index()]
                    .to_integer()
                    .to_usize()
                    .expect("counter within bounds");
                deleted.extend(&members[..k]);
            }
            deleted.sort_unstable();
            Some(deleted)
        }
    };
    finish(deleted, result.stats)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElectionDoc {
    format: String,
    candidates: Vec<String>,
    p: String,
    voters: Vec<VoterDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    addable: Vec<VoterDoc>,
    budget: u64,
    #[serde(default)]
    rule: RuleDoc,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
enum RuleDoc {
    #[default]
    Approval,
    Scoring(Vec<i64>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VoterDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    approves: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ranking: Option<Vec<String>>,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    weight: u64,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    price: u64,
}

fn one() -> u64 {
    1
}

fn is_one(v: &u64) -> bool {
    *v == 1
}

fn approval_doc(v: &ApprovalVoter, names: &[String]) -> VoterDoc {
    VoterDoc {
        approves: Some(v.approves.iter().map(|&c| names[c].clone()).collect()),
        ranking: None,
        weight: v.weight,
        price: v.price,
    }
}

impl Election {
    /// Parses an `election-v1` document. `p` becomes candidate 0; the other
    /// candidates keep their listed order.
    pub fn from_json(text: &str) -> Result<Self, InputError> {
        let doc: ElectionDoc = read_document(text, FORMAT)?;
        let invalid = |msg: String| InputError::Invalid(msg);
        if !doc.candidates.contains(&doc.p) {
            return Err(invalid(format!("p = {:?} is not a candidate", doc.p)));
        }
        let mut candidates = vec![doc.p.clone()];
        candidates.extend(doc.candidates.iter().filter(|c| **c != doc.p).cloned());
        let index: HashMap<String, usize> = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        if index.len() != candidates.len() {
            return Err(invalid("candidate names must be distinct".into()));
        }
        let lookup = |voter: usize, names: &[String]| -> Result<Vec<usize>, InputError> {
            names
                .iter()
                .map(|n| {
                    index
                        .get(n)
                        .copied()
                        .ok_or_else(|| invalid(format!("voter {voter}: unknown candidate {n:?}")))
                })
                .collect()
        };
        let election = match doc.rule {
            RuleDoc::Approval => {
                let convert = |docs: &[VoterDoc]| -> Result<Vec<ApprovalVoter>, InputError> {
                    docs.iter()
                        .enumerate()
                        .map(|(i, v)| {
                            let approves = v.approves.as_ref().ok_or_else(|| {
                                invalid(format!("voter {i}: approval rule needs \"approves\""))
                            })?;
                            Ok(ApprovalVoter {
                                approves: lookup(i, approves)?.into_iter().collect(),
                                weight: v.weight,
                                price: v.price,
                            })
                        })
                        .collect()
                };
                let e = ApprovalElection {
                    candidates,
                    voters: convert(&doc.voters)?,
                    addable: convert(&doc.addable)?,
                    budget: doc.budget,
                };
                e.validate().map_err(|err| invalid(err.to_string()))?;
                Election::Approval(e)
            }
            RuleDoc::Scoring(scoring) => {
                if !doc.addable.is_empty() {
                    return Err(invalid(
                        "addable voters are not supported with a scoring rule".into(),
                    ));
                }
                let voters = doc
                    .voters
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let ranking = v.ranking.as_ref().ok_or_else(|| {
                            invalid(format!("voter {i}: scoring rule needs \"ranking\""))
                        })?;
                        if v.weight != 1 {
                            return Err(invalid(format!(
                                "voter {i}: weights are not supported with a scoring rule"
                            )));
                        }
                        Ok(RankedVoter {
                            ranking: lookup(i, ranking)?,
                            price: v.price,
                        })
                    })
                    .collect::<Result<_, _>>()?;
                let e = OrdinalElection {
                    candidates,
                    voters,
                    scoring,
                    budget: doc.budget,
                };
                e.validate().map_err(|err| invalid(err.to_string()))?;
                Election::Ordinal(e)
            }
        };
        Ok(election)
    }

    pub fn to_json(&self) -> String {
        match self {
            Election::Approval(e) => e.to_json(),
            Election::Ordinal(e) => e.to_json(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn priced(approves: &[usize], price: u64) -> ApprovalVoter {
        ApprovalVoter::new(approves.iter().copied()).with_price(price)
    }

    fn weighted(approves: &[usize], weight: u64) -> ApprovalVoter {
        ApprovalVoter::new(approves.iter().copied()).with_weight(weight)
    }

    fn min_cost() -> VotingOptions {
        VotingOptions {
            minimize_cost: true,
            ..Default::default()
        }
    }

    #[test]
    fn scores_count_weights() {
        let e = ApprovalElection::with_candidates(
            2,
            vec![priced(&[0], 1), priced(&[0, 1], 1), weighted(&[1], 5)],
            0,
        );
        assert_eq!(approval_score(&e), vec![2, 6]);
        let empty = ApprovalElection::with_candidates(3, vec![], 0);
        assert_eq!(approval_score(&empty), vec![0, 0, 0]);
    }

    #[test]
    fn ccdv_deletes_cheapest_pair() {
        let voters = vec![
            priced(&[0], 1),
            priced(&[1], 1),
            priced(&[1], 2),
            priced(&[1], 5),
        ];
        let e = ApprovalElection::with_candidates(2, voters.clone(), 3);
        let r = solve_ccdv_priced(&e, &min_cost(), &Solver::default()).unwrap();
        assert!(r.feasible);
        assert_eq!(r.action, Action::Delete(vec![1, 2]));
        assert_eq!(r.cost, 3);
        let tight = ApprovalElection::with_candidates(2, voters, 2);
        assert!(
            !solve_ccdv_priced(&tight, &min_cost(), &Solver::default())
                .unwrap()
                .feasible
        );
    }

    #[test]
    fn winning_p_needs_nothing() {
        let e = ApprovalElection::with_candidates(2, vec![priced(&[0], 1)], 0);
        let r = solve_ccdv_priced(&e, &VotingOptions::default(), &Solver::default()).unwrap();
        assert!(r.feasible && r.action.voters().is_empty());
        let r = solve_bribery_priced(&e, &VotingOptions::default(), &Solver::default()).unwrap();
        assert!(r.feasible && r.cost == 0);
    }

    #[test]
    fn unique_winner_breaks_ties() {
        let e = ApprovalElection::with_candidates(2, vec![priced(&[0], 1), priced(&[1], 1)], 0);
        let unique = VotingOptions {
            unique_winner: true,
            ..Default::default()
        };
        assert!(
            solve_ccdv_priced(&e, &VotingOptions::default(), &Solver::default())
                .unwrap()
                .feasible
        );
        assert!(
            !solve_ccdv_priced(&e, &unique, &Solver::default())
                .unwrap()
                .feasible
        );
    }

    #[test]
    fn bribery_examples() {
        let e = ApprovalElection::with_candidates(2, vec![priced(&[1], 1), priced(&[1], 1)], 2);
        let r = solve_bribery_priced(&e, &min_cost(), &Solver::default()).unwrap();
        assert!(r.feasible);
        assert_eq!(r.cost, 1);
        let e = ApprovalElection::with_candidates(2, vec![priced(&[1], 4); 3], 4);
        let r = solve_bribery_priced(&e, &min_cost(), &Solver::default()).unwrap();
        // Bribing one voter leaves p at 1 against c1 at 2.
        assert!(!r.feasible);
    }

    #[test]
    fn ccav_examples() {
        let mut e = ApprovalElection::with_candidates(2, vec![priced(&[1], 1)], 1);
        assert!(
            !solve_ccav_priced(&e, &min_cost(), &Solver::default())
                .unwrap()
                .feasible
        );
        e.addable = vec![priced(&[0, 1], 1), priced(&[0], 1)];
        let r = solve_ccav_priced(&e, &min_cost(), &Solver::default()).unwrap();
        assert_eq!(r.action, Action::Add(vec![1]));
    }

    #[test]
    fn weighted_examples() {
        let e = ApprovalElection::with_candidates(
            2,
            vec![weighted(&[1], 3), weighted(&[1], 1), weighted(&[0], 2)],
            1,
        );
        let r = solve_ccdv_weighted(&e, &min_cost(), &Solver::default()).unwrap();
        assert_eq!(r.action, Action::Delete(vec![0]));
        let mut e = ApprovalElection::with_candidates(2, vec![weighted(&[1], 4)], 1);
        e.addable = vec![weighted(&[0], 5)];
        let r = solve_ccav_weighted(&e, &min_cost(), &Solver::default()).unwrap();
        assert!(r.feasible);
        assert!(matches!(
            solve_ccav_priced(&e, &min_cost(), &Solver::default()),
            Err(VotingError::NonUnitWeight { .. })
        ));
    }

    fn ranked(ranking: &[usize], price: u64) -> RankedVoter {
        RankedVoter {
            ranking: ranking.to_vec(),
            price,
        }
    }

    #[test]
    fn borda_deletion() {
        let voters = vec![
            ranked(&[1, 0, 2], 1),
            ranked(&[1, 0, 2], 1),
            ranked(&[0, 1, 2], 1),
        ];
        let e = OrdinalElection::with_candidates(3, voters.clone(), vec![2, 1, 0], 1);
        let r = solve_scoring_ccdv(&e, &min_cost(), &Solver::default()).unwrap();
        assert!(r.feasible);
        assert_eq!(r.cost, 1);
        let broke = OrdinalElection::with_candidates(3, voters, vec![2, 1, 0], 0);
        assert!(
            !solve_scoring_ccdv(&broke, &min_cost(), &Solver::default())
                .unwrap()
                .feasible
        );
    }

    #[test]
    fn scoring_cap_is_enforced() {
        let e = OrdinalElection::with_candidates(6, vec![], vec![5, 4, 3, 2, 1, 0], 0);
        assert!(matches!(
            solve_scoring_ccdv(&e, &VotingOptions::default(), &Solver::default()),
            Err(VotingError::TooManyCandidates { .. })
        ));
    }

    #[test]
    fn json_round_trip_moves_p_first() {
        let text = r#"{"format":"election-v1","candidates":["a","b"],"p":"b",
            "voters":[{"approves":["a"],"price":3},{"approves":["b"]}],"budget":3}"#;
        let Election::Approval(e) = Election::from_json(text).unwrap() else {
            panic!("expected approval election");
        };
        assert_eq!(e.candidates, vec!["b", "a"]);
        assert_eq!(e.voters[0].approves, [1].into_iter().collect());
        assert_eq!(e.voters[0].price, 3);
        let again = Election::from_json(&e.to_json()).unwrap();
        assert_eq!(again, Election::Approval(e));

        let scoring = r#"{"format":"election-v1","candidates":["p","x","y"],"p":"p",
            "voters":[{"ranking":["x","p","y"]}],"budget":1,"rule":{"scoring":[2,1,0]}}"#;
        assert!(matches!(
            Election::from_json(scoring).unwrap(),
            Election::Ordinal(_)
        ));
        let bad = scoring.replace("[2,1,0]", "[0,1,2]");
        assert!(Election::from_json(&bad).is_err());
    }
}
