//! MILP export in the plain-text LP grammar.
//!
//! The exported model lets flows take any route, unlike the solvers which pin
//! each commodity to its shortest path. Every non-shortest route detours
//! through the OLT or an extra passive hop, so the optimum only differs when a
//! shortest path is over capacity.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::Result;
use crate::power::{OnuProfile, OnuSpec, Weights};
use crate::solver::routing::{commodities, Commodity};
use crate::solver::Instance;
use crate::topology::{NodeId, NodeKind};

/// Name of the continuous variable fixed to 1 that carries constant power terms.
pub const CONST_VAR: &str = "const_one";

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub var: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<Term>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bound {
    pub var: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MilpDocument {
    pub objective: Vec<Term>,
    pub constraints: Vec<Constraint>,
    /// Only non-default bounds; everything else is `[0, inf)`.
    pub bounds: Vec<Bound>,
    pub binaries: Vec<String>,
    pub continuous: Vec<String>,
}

pub fn x_var(vm: usize, server: &NodeId) -> String {
    format!("x_v{vm}_{server}")
}

pub fn y_var(server: &NodeId) -> String {
    format!("y_{server}")
}

pub fn flow_var(c: &Commodity, from: &NodeId, to: &NodeId) -> String {
    format!("f_{}_{from}_{to}", c.tag())
}

/// Accumulates objective coefficients per variable, keeping first-seen order.
#[derive(Default)]
struct Objective {
    terms: Vec<Term>,
    index: HashMap<String, usize>,
}

impl Objective {
    fn add(&mut self, var: &str, coef: f64) {
        match self.index.get(var) {
            Some(&i) => self.terms[i].coef += coef,
            None => {
                self.index.insert(var.to_string(), self.terms.len());
                self.terms.push(Term { coef, var: var.to_string() });
            }
        }
    }
}

fn term(coef: f64, var: String) -> Term {
    Term { coef, var }
}

/// Idle part and per-Gbps slope of an ONU that is always on.
fn onu_linear(spec: &OnuSpec) -> (f64, f64) {
    match spec.profile {
        OnuProfile::OnOff => (spec.max_w, 0.0),
        OnuProfile::Proportional => (spec.idle_w, (spec.max_w - spec.idle_w) / spec.rate_gbps),
    }
}

pub fn export_milp(inst: &Instance<'_>, weights: &Weights) -> Result<MilpDocument> {
    let topo = inst.topology;
    let specs = inst.specs;
    let (alpha, beta) = (weights.alpha, weights.beta);
    let servers = inst.canonical_servers();
    let vms = &inst.workload.vms;
    let comms = commodities(inst);

    let mut doc = MilpDocument::default();
    let mut obj = Objective::default();

    // directed arcs in link order, a->b then b->a
    let arcs: Vec<(usize, NodeId, NodeId)> =
        topo.links().iter().enumerate().flat_map(|(i, l)| [(i, l.a, l.b), (i, l.b, l.a)]).collect();

    for vm in vms {
        for s in &servers {
            doc.binaries.push(x_var(vm.id, s));
        }
    }
    for s in &servers {
        doc.binaries.push(y_var(s));
    }
    doc.continuous.push(CONST_VAR.to_string());
    doc.bounds.push(Bound { var: CONST_VAR.to_string(), lower: 1.0, upper: 1.0 });
    for (c, _) in &comms {
        for (_, m, n) in &arcs {
            doc.continuous.push(flow_var(c, m, n));
        }
    }

    // processing power
    let (onu_fixed, onu_slope) = match specs.server_onu.profile {
        OnuProfile::OnOff => (specs.server_onu.max_w, 0.0),
        OnuProfile::Proportional => onu_linear(&specs.server_onu),
    };
    for s in &servers {
        let spec = specs.server(s).expect("validated instance");
        obj.add(&y_var(s), beta * (spec.idle_w + onu_fixed));
        for vm in vms {
            obj.add(&x_var(vm.id, s), beta * spec.slope() * vm.cpu_ghz);
        }
    }

    // network power: constants ride on the fixed variable
    let (acc_idle, acc_slope) = onu_linear(&specs.access_onu);
    let olt_slope = (specs.olt.max_w - specs.olt.idle_w) / specs.olt.rate_gbps;
    let constant = acc_idle * topo.access_onus().count() as f64 + specs.olt.idle_w * topo.olts().count() as f64;
    obj.add(CONST_VAR, alpha * constant);
    for (c, _) in &comms {
        for (_, m, n) in &arcs {
            let var = flow_var(c, m, n);
            for end in [m, n] {
                match end.kind {
                    NodeKind::AccessOnu => obj.add(&var, alpha * acc_slope),
                    NodeKind::ServerOnu => obj.add(&var, beta * onu_slope),
                    _ => {}
                }
            }
            if n.kind == NodeKind::Olt {
                obj.add(&var, alpha * olt_slope);
            }
        }
    }
    doc.objective = obj.terms.into_iter().filter(|t| t.coef != 0.0).collect();

    for vm in vms {
        doc.constraints.push(Constraint {
            name: format!("assign_v{}", vm.id),
            terms: servers.iter().map(|s| term(1.0, x_var(vm.id, s))).collect(),
            relation: Relation::Eq,
            rhs: 1.0,
        });
    }
    for s in &servers {
        let spec = specs.server(s).expect("validated instance");
        if vms.is_empty() {
            break;
        }
        doc.constraints.push(Constraint {
            name: format!("cpu_{s}"),
            terms: vms.iter().map(|v| term(v.cpu_ghz, x_var(v.id, s))).collect(),
            relation: Relation::Le,
            rhs: spec.cpu_ghz,
        });
        doc.constraints.push(Constraint {
            name: format!("ram_{s}"),
            terms: vms.iter().map(|v| term(v.ram_mb, x_var(v.id, s))).collect(),
            relation: Relation::Le,
            rhs: spec.ram_mb(),
        });
    }
    for s in &servers {
        for vm in vms {
            doc.constraints.push(Constraint {
                name: format!("act_v{}_{s}", vm.id),
                terms: vec![term(1.0, y_var(s)), term(-1.0, x_var(vm.id, s))],
                relation: Relation::Ge,
                rhs: 0.0,
            });
        }
    }

    // conservation: outflow - inflow = signed demand
    for (c, demand) in &comms {
        for node in topo.nodes() {
            let mut terms = Vec::new();
            for (_, m, n) in &arcs {
                if m == node {
                    terms.push(term(1.0, flow_var(c, m, n)));
                } else if n == node {
                    terms.push(term(-1.0, flow_var(c, m, n)));
                }
            }
            let mut rhs = 0.0;
            match *c {
                Commodity::Pair { from, to } if node.is_server() => {
                    terms.push(term(-demand, x_var(from, node)));
                    terms.push(term(*demand, x_var(to, node)));
                }
                Commodity::Ingress { vm } => {
                    if *node == vms[vm].origin {
                        rhs = *demand;
                    }
                    if node.is_server() {
                        terms.push(term(*demand, x_var(vm, node)));
                    }
                }
                _ => {}
            }
            doc.constraints.push(Constraint {
                name: format!("flow_{}_{node}", c.tag()),
                terms,
                relation: Relation::Eq,
                rhs,
            });
        }
    }

    if !comms.is_empty() {
        for (i, link) in topo.links().iter().enumerate() {
            let terms = comms
                .iter()
                .flat_map(|(c, _)| {
                    arcs.iter().filter(move |a| a.0 == i).map(move |(_, m, n)| term(1.0, flow_var(c, m, n)))
                })
                .collect();
            doc.constraints.push(Constraint {
                name: format!("cap_{}_{}", link.a, link.b),
                terms,
                relation: Relation::Le,
                rhs: link.capacity_gbps,
            });
        }
        // line rates of load-dependent devices
        for node in topo.nodes() {
            let rate = match node.kind {
                NodeKind::AccessOnu if specs.access_onu.profile == OnuProfile::Proportional => {
                    specs.access_onu.rate_gbps
                }
                NodeKind::ServerOnu if specs.server_onu.profile == OnuProfile::Proportional => {
                    specs.server_onu.rate_gbps
                }
                NodeKind::Olt => specs.olt.rate_gbps,
                _ => continue,
            };
            let mut terms = Vec::new();
            for (c, _) in &comms {
                for (_, m, n) in &arcs {
                    // the OLT is pure transit, so its inflow is its throughput
                    let counts = if node.kind == NodeKind::Olt { n == node } else { m == node || n == node };
                    if counts {
                        terms.push(term(1.0, flow_var(c, m, n)));
                    }
                }
            }
            doc.constraints.push(Constraint { name: format!("rate_{node}"), terms, relation: Relation::Le, rhs: rate });
        }
    }
    Ok(doc)
}

fn push_terms(out: &mut String, terms: &[Term]) {
    if terms.is_empty() {
        out.push_str(" 0 ");
        out.push_str(CONST_VAR);
        out.push('\n');
        return;
    }
    for (i, t) in terms.iter().enumerate() {
        let sign = if t.coef < 0.0 {
            "-"
        } else if i == 0 {
            ""
        } else {
            "+"
        };
        let _ = writeln!(out, "   {sign} {} {}", t.coef.abs(), t.var);
    }
}

impl MilpDocument {
    pub fn variable_count(&self) -> usize {
        self.binaries.len() + self.continuous.len()
    }

    /// Render as LP text. Identical documents give byte-identical text.
    pub fn to_lp_string(&self) -> String {
        let mut out = String::from("\\ fog VM placement\nMinimize\n obj:\n");
        push_terms(&mut out, &self.objective);
        out.push_str("Subject To\n");
        for c in &self.constraints {
            let _ = writeln!(out, " {}:", c.name);
            push_terms(&mut out, &c.terms);
            let _ = writeln!(out, "   {} {}", c.relation.symbol(), c.rhs);
        }
        out.push_str("Bounds\n");
        for b in &self.bounds {
            if b.lower == b.upper {
                let _ = writeln!(out, " {} = {}", b.var, b.lower);
            } else if b.upper.is_infinite() {
                let _ = writeln!(out, " {} >= {}", b.var, b.lower);
            } else {
                let _ = writeln!(out, " {} <= {} <= {}", b.lower, b.var, b.upper);
            }
        }
        if !self.binaries.is_empty() {
            out.push_str("Binaries\n");
            for b in &self.binaries {
                let _ = writeln!(out, " {b}");
            }
        }
        out.push_str("End\n");
        out
    }
}
