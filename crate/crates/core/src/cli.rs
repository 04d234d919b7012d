//! Command dispatch behind the `histkit` binary.
//!
//! Every run writes `report.txt` (key=value lines) into the output directory,
//! plus command-specific CSV files. Exit codes: 0 success, 2 invalid scenario
//! or command/kind mismatch, 3 refused operation, 1 anything else.

use std::fs;
use std::path::Path;

use clap::ValueEnum;

use crate::classical::{classical_decoherence_matrix, epsilon_deterministic_check, ClassicalError};
use crate::decoherence::{check_consistency_with, probabilities_with, DecoherenceMatrix, EngineError};
use crate::history::HistorySet;
use crate::io::{format_complex, format_g17, write_atomic, CsvTable, KvReport};
use crate::phase_space::{cell_history_consistency, coherent_stability, husimi_table, nu_cell, PhaseError};
use crate::scenario::{parse_scenario, Propositions, QuantumSystem, Scenario, ScenarioError, System};
use crate::window::{
    certify_classicality, contrary_inference_finder, energy_window, search_consistent_sets, spectral_window,
    WindowCandidate, WindowError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_REFUSED: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Command {
    Consistency,
    Probabilities,
    Classical,
    EpsilonDet,
    Cells,
    Search,
    Contrary,
    Certify,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Consistency => "consistency",
            Command::Probabilities => "probabilities",
            Command::Classical => "classical",
            Command::EpsilonDet => "epsilon_det",
            Command::Cells => "cells",
            Command::Search => "search",
            Command::Contrary => "contrary",
            Command::Certify => "certify",
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Refused(String),
    Internal(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => EXIT_INVALID,
            Failure::Refused(_) => EXIT_REFUSED,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn status(&self) -> (&'static str, &str) {
        match self {
            Failure::Invalid(m) => ("invalid", m),
            Failure::Refused(m) => ("refused", m),
            Failure::Internal(m) => ("error", m),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Refused { .. } | EngineError::Normalization { .. } | EngineError::InvalidDiagonal { .. } => {
                Failure::Refused(e.to_string())
            }
            EngineError::NegativeEpsilon(_) => Failure::Invalid(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

impl From<WindowError> for Failure {
    fn from(e: WindowError) -> Self {
        match e {
            WindowError::InconsistentWindow { .. }
            | WindowError::NotFineGrained
            | WindowError::UnstableSampleSpace { .. }
            | WindowError::NotBistochastic { .. }
            | WindowError::NotAdditive { .. } => Failure::Refused(e.to_string()),
            WindowError::InfeasibleRanks(_) | WindowError::InvalidOptions(_) => Failure::Invalid(e.to_string()),
            WindowError::Engine(inner) => inner.into(),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

impl From<ClassicalError> for Failure {
    fn from(e: ClassicalError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<PhaseError> for Failure {
    fn from(e: PhaseError) -> Self {
        match e {
            PhaseError::Engine(inner) => inner.into(),
            PhaseError::OverlappingCells { .. }
            | PhaseError::EmptyPartition(_)
            | PhaseError::InvalidCell(_)
            | PhaseError::EmptyGrid => Failure::Invalid(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

/// Report and CSV files produced by a successful command.
#[derive(Debug, Default)]
pub struct Outputs {
    pub report: KvReport,
    pub tables: Vec<(String, CsvTable)>,
}

impl Outputs {
    fn table(&mut self, name: &str, t: CsvTable) {
        self.tables.push((name.to_string(), t));
    }
}

/// Runs one command and writes its outputs; returns the process exit code.
pub fn run(command: Command, scenario_path: &Path, out_dir: &Path, epsilon: Option<f64>, seed: Option<u64>) -> i32 {
    let mut header = KvReport::new();
    header
        .push("command", command.as_str())
        .push("scenario", scenario_path.display());
    let result = parse_scenario(scenario_path).map_err(Failure::from).and_then(|mut s| {
        if let Some(e) = epsilon {
            s.epsilon = e;
        }
        if let Some(x) = seed {
            s.seed = x;
        }
        header
            .push("kind", s.kind.as_str())
            .push("seed", s.seed)
            .push_f64("epsilon", s.epsilon);
        execute(command, &s)
    });
    let (code, outputs) = match result {
        Ok(mut o) => {
            header.push("status", "ok");
            header.extend(&o.report);
            o.report = header;
            (EXIT_OK, o)
        }
        Err(f) => {
            let (status, message) = f.status();
            header
                .push("status", status)
                .push("message", message.replace('\n', " "));
            eprintln!("histkit {}: {status}: {message}", command.as_str());
            (
                f.code(),
                Outputs {
                    report: header,
                    tables: Vec::new(),
                },
            )
        }
    };
    match write_outputs(out_dir, &outputs) {
        Ok(()) => code,
        Err(e) => {
            eprintln!("histkit: cannot write to {}: {e}", out_dir.display());
            EXIT_INTERNAL
        }
    }
}

fn write_outputs(dir: &Path, o: &Outputs) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, t) in &o.tables {
        write_atomic(&dir.join(name), &t.render())?;
    }
    write_atomic(&dir.join("report.txt"), &o.report.render())
}

/// Runs a command against an already loaded scenario.
pub fn execute(command: Command, scenario: &Scenario) -> Result<Outputs, Failure> {
    let system = scenario.build()?;
    match (&system, command) {
        (System::Quantum(q), Command::Consistency) => quantum_consistency(q, scenario, false),
        (System::Quantum(q), Command::Probabilities) => quantum_consistency(q, scenario, true),
        (System::Quantum(q), Command::Search) => quantum_search(q, scenario),
        (System::Quantum(q), Command::Contrary) => quantum_contrary(q, scenario),
        (System::Quantum(q), Command::Certify) => quantum_certify(q, scenario),
        (System::Classical(_), Command::Classical | Command::Consistency | Command::Probabilities) => {
            classical(&system, scenario, command == Command::Probabilities)
        }
        (System::Classical(_), Command::EpsilonDet) => epsilon_det(&system, scenario),
        (System::PhaseSpace(_), Command::Cells) => cells(&system, scenario),
        _ => Err(Failure::Invalid(format!(
            "command {} does not apply to a {} scenario",
            command.as_str(),
            scenario.kind.as_str()
        ))),
    }
}

fn window_for(q: &QuantumSystem, s: &Scenario) -> Result<WindowCandidate, Failure> {
    let exact = s.tolerances.consistency();
    let mut w = match &q.propositions {
        Propositions::Explicit(set) => WindowCandidate::evaluate(set.clone(), &q.dynamics, s.epsilon, Vec::new())?,
        Propositions::Energy => energy_window(&q.dynamics, &q.grid)?,
        Propositions::Spectral => spectral_window(&q.dynamics, &q.grid)?,
        Propositions::Search(family) => {
            let opts = s
                .quantum
                .as_ref()
                .expect("quantum section")
                .search
                .options(s.epsilon, s.seed);
            search_consistent_sets(&q.dynamics, &q.grid, family, &opts)?
                .into_iter()
                .next()
                .ok_or_else(|| Failure::Refused(format!("search found no set with score ≤ {}", s.epsilon)))?
        }
    };
    w.report = check_consistency_with(&w.matrix, s.epsilon, &exact)?;
    w.score = w.report.worst_ratio;
    Ok(w)
}

fn quantum_consistency(q: &QuantumSystem, s: &Scenario, with_probabilities: bool) -> Result<Outputs, Failure> {
    let w = window_for(q, s)?;
    let mut o = Outputs::default();
    o.report.push("histories", w.history_set.len());
    o.report.extend(&w.report.to_kv());
    o.table("decoherence.csv", w.matrix.to_csv());
    if with_probabilities {
        let p = probabilities_with(&w.matrix, s.epsilon, &s.tolerances.consistency())?;
        o.table("probabilities.csv", p.to_csv());
    }
    Ok(o)
}

fn quantum_search(q: &QuantumSystem, s: &Scenario) -> Result<Outputs, Failure> {
    let Propositions::Search(family) = &q.propositions else {
        return Err(Failure::Invalid("search needs propositions.mode = \"search\"".into()));
    };
    let opts = s
        .quantum
        .as_ref()
        .expect("quantum section")
        .search
        .options(s.epsilon, s.seed);
    let found = search_consistent_sets(&q.dynamics, &q.grid, family, &opts)?;
    let mut o = Outputs::default();
    o.report.push("candidates", found.len());
    let width = found.first().map_or(0, |c| c.params.len());
    let mut header = vec!["rank".to_string(), "score".into(), "verdict".into()];
    header.extend((0..width).map(|i| format!("param_{i}")));
    let mut table = CsvTable::new(header);
    for (i, c) in found.iter().enumerate() {
        let mut row = vec![i.to_string(), format_g17(c.score), c.report.verdict.to_string()];
        row.extend(c.params.iter().map(|x| format_g17(*x)));
        table.push_row(row);
    }
    o.table("candidates.csv", table);
    if let Some(best) = found.first() {
        o.report.push_f64("best_score", best.score);
        o.report.extend_prefixed("best.", &best.report.to_kv());
        o.table("best_decoherence.csv", best.matrix.to_csv());
        o.table("best_projectors.csv", projector_table(&[&best.history_set]));
    }
    Ok(o)
}

fn projector_table(sets: &[&HistorySet]) -> CsvTable {
    let mut t = CsvTable::new(
        ["set", "slot", "alternative", "row", "column", "value"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    );
    for (k, set) in sets.iter().enumerate() {
        for (s, slot) in set.alternatives().iter().enumerate() {
            for (a, m) in slot.iter().enumerate() {
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        t.push_row(vec![
                            k.to_string(),
                            s.to_string(),
                            a.to_string(),
                            i.to_string(),
                            j.to_string(),
                            format_complex(m[(i, j)]),
                        ]);
                    }
                }
            }
        }
    }
    t
}

fn quantum_contrary(q: &QuantumSystem, s: &Scenario) -> Result<Outputs, Failure> {
    let opts = s
        .quantum
        .as_ref()
        .expect("quantum section")
        .search
        .contrary(s.epsilon, s.seed);
    let mut o = Outputs::default();
    match contrary_inference_finder(&q.dynamics, &q.grid, &opts)? {
        Some(w) => {
            o.report.extend(&w.to_kv());
            o.table("decoherence_1.csv", w.matrix1.to_csv());
            o.table("decoherence_2.csv", w.matrix2.to_csv());
            o.table("projectors.csv", projector_table(&[&w.set1, &w.set2]));
        }
        None => {
            o.report.push("witness", false);
        }
    }
    Ok(o)
}

fn quantum_certify(q: &QuantumSystem, s: &Scenario) -> Result<Outputs, Failure> {
    let w = window_for(q, s)?;
    let cert = certify_classicality(&w, &q.dynamics, s.epsilon)?;
    let mut o = Outputs::default();
    o.report.push("certified", true);
    o.report.extend(&cert.to_kv());
    let mut t = CsvTable::new(
        ["step", "from", "to", "probability"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    );
    for (k, m) in cert.transitions.iter().enumerate() {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                t.push_row(vec![k.to_string(), i.to_string(), j.to_string(), format_g17(m[(i, j)])]);
            }
        }
    }
    o.table("transitions.csv", t);
    o.table("decoherence.csv", w.matrix.to_csv());
    Ok(o)
}

fn classical_matrix(system: &System) -> Result<DecoherenceMatrix, Failure> {
    let System::Classical(c) = system else { unreachable!() };
    Ok(classical_decoherence_matrix(
        &c.space,
        &c.partitions,
        &c.maps,
        &c.state,
    )?)
}

fn classical(system: &System, s: &Scenario, require_consistent: bool) -> Result<Outputs, Failure> {
    let dm = classical_matrix(system)?;
    let opts = s.tolerances.consistency();
    let report = check_consistency_with(&dm, s.epsilon, &opts)?;
    let mut o = Outputs::default();
    o.report.push("histories", dm.len());
    o.report.extend(&report.to_kv());
    o.table("decoherence.csv", dm.to_csv());
    match probabilities_with(&dm, s.epsilon, &opts) {
        Ok(p) => o.table("probabilities.csv", p.to_csv()),
        Err(e) if require_consistent => return Err(e.into()),
        Err(_) => {}
    }
    Ok(o)
}

fn epsilon_det(system: &System, s: &Scenario) -> Result<Outputs, Failure> {
    let System::Classical(c) = system else { unreachable!() };
    let metric = c
        .metric
        .as_ref()
        .ok_or_else(|| Failure::Invalid("epsilon_det needs classical.metric".into()))?;
    if c.probes.is_empty() {
        return Err(Failure::Invalid("epsilon_det needs classical.probes".into()));
    }
    let mut map = c.maps[0].clone();
    for m in &c.maps[1..] {
        map = map.then(m)?;
    }
    let report = epsilon_deterministic_check(&c.space, metric, &map, s.epsilon, &c.probes, &c.candidates)?;
    let mut o = Outputs::default();
    o.report.extend(&report.to_kv());
    Ok(o)
}

fn cells(system: &System, s: &Scenario) -> Result<Outputs, Failure> {
    let System::PhaseSpace(p) = system else { unreachable!() };
    let mut o = Outputs::default();
    if !p.cells.is_empty() {
        let r = cell_history_consistency(&p.cells, &p.grid, &p.hamiltonian, &p.state, s.epsilon, &p.space)?;
        let report = check_consistency_with(&r.matrix, s.epsilon, &s.tolerances.consistency())?;
        o.report.push("histories", r.matrix.len());
        o.report.extend(&report.to_kv());
        o.report.push_f64("max_nu", r.max_nu);
        for (k, n) in r.remainder_norms.iter().enumerate() {
            o.report.push_f64(format!("remainder_norm.{k}"), *n);
        }
        let mut nus = CsvTable::new(["slot", "cell", "nu"].iter().map(|s| s.to_string()).collect());
        for (k, row) in p.cells.iter().enumerate() {
            for (i, c) in row.iter().enumerate() {
                nus.push_row(vec![k.to_string(), i.to_string(), format_g17(nu_cell(c, &p.space))]);
            }
        }
        o.table("cells.csv", nus);
        o.table("decoherence.csv", r.matrix.to_csv());
    }
    if let Some(region) = &p.husimi {
        o.table("husimi.csv", husimi_table(&p.state, region, &p.space)?);
    }
    if let Some((z, t)) = p.stability {
        let r = coherent_stability(z, &p.hamiltonian, t, &p.space)?;
        o.report
            .push_f64("stability.overlap", r.overlap)
            .push_f64("stability.q", r.classical_point.q(p.space.hbar()))
            .push_f64("stability.p", r.classical_point.p(p.space.hbar()))
            .push("stability.truncation_warning", r.truncation_warning);
    }
    if o.tables.is_empty() && o.report.entries().is_empty() {
        return Err(Failure::Invalid(
            "cells needs phase_space.cells, husimi or stability".into(),
        ));
    }
    Ok(o)
}
