use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};

/// Index of a node; 0 is ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const GROUND: NodeId = NodeId(0);

    pub fn is_ground(self) -> bool {
        self.0 == 0
    }
}

/// Linear circuit element. Sources carry complex phasor amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    Resistor {
        name: String,
        a: NodeId,
        b: NodeId,
        ohms: f64,
    },
    Capacitor {
        name: String,
        a: NodeId,
        b: NodeId,
        farads: f64,
    },
    /// Drives `amps` out of `from` and into `to`.
    CurrentSource {
        name: String,
        from: NodeId,
        to: NodeId,
        amps: Complex64,
    },
    /// Holds v(pos) - v(neg) = `volts`.
    VoltageSource {
        name: String,
        pos: NodeId,
        neg: NodeId,
        volts: Complex64,
    },
    /// Ideal op amp (nullor) when `gain` is `None`, otherwise a
    /// voltage-controlled voltage source v_out = gain·(v+ - v-).
    OpAmp {
        name: String,
        in_p: NodeId,
        in_n: NodeId,
        out: NodeId,
        gain: Option<f64>,
    },
}

impl Element {
    pub fn name(&self) -> &str {
        match self {
            Element::Resistor { name, .. }
            | Element::Capacitor { name, .. }
            | Element::CurrentSource { name, .. }
            | Element::VoltageSource { name, .. }
            | Element::OpAmp { name, .. } => name,
        }
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        match *self {
            Element::Resistor { a, b, .. } | Element::Capacitor { a, b, .. } => vec![a, b],
            Element::CurrentSource { from, to, .. } => vec![from, to],
            Element::VoltageSource { pos, neg, .. } => vec![pos, neg],
            Element::OpAmp { in_p, in_n, out, .. } => vec![in_p, in_n, out],
        }
    }

    /// True when the element adds a branch-current unknown.
    pub(crate) fn has_branch(&self) -> bool {
        matches!(self, Element::VoltageSource { .. } | Element::OpAmp { .. })
    }

    pub fn is_source(&self) -> bool {
        matches!(self, Element::CurrentSource { .. } | Element::VoltageSource { .. })
    }
}

/// A flat netlist of linear elements over named nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    nodes: Vec<String>,
    elements: Vec<Element>,
}

impl Default for Netlist {
    fn default() -> Self {
        Self::new()
    }
}

impl Netlist {
    pub fn new() -> Self {
        Self {
            nodes: vec!["gnd".to_string()],
            elements: Vec::new(),
        }
    }

    /// Returns the node called `name`, creating it if needed.
    pub fn node(&mut self, name: &str) -> NodeId {
        if let Some(id) = self.node_id(name) {
            return id;
        }
        self.nodes.push(name.to_string());
        NodeId(self.nodes.len() - 1)
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n == name).map(NodeId)
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.nodes[id.0]
    }

    /// Node count including ground.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.name() == name)
    }

    pub fn add(&mut self, element: Element) -> Result<()> {
        if self.element(element.name()).is_some() {
            return Err(Error::Netlist(format!("duplicate element `{}`", element.name())));
        }
        if let Some(bad) = element.nodes().iter().find(|n| n.0 >= self.nodes.len()) {
            return Err(Error::Netlist(format!("`{}` uses unknown node {}", element.name(), bad.0)));
        }
        let value_ok = match &element {
            Element::Resistor { ohms, .. } => *ohms > 0.0 && ohms.is_finite(),
            Element::Capacitor { farads, .. } => *farads >= 0.0 && farads.is_finite(),
            Element::OpAmp { in_p, in_n, out, gain, .. } => {
                out != in_p && out != in_n && gain.is_none_or(|g| g.is_finite() && g != 0.0)
            }
            _ => true,
        };
        if !value_ok {
            return Err(Error::Netlist(format!("invalid element `{}`", element.name())));
        }
        self.elements.push(element);
        Ok(())
    }

    pub fn resistor(&mut self, name: &str, a: &str, b: &str, ohms: f64) -> Result<()> {
        let (a, b) = (self.node(a), self.node(b));
        self.add(Element::Resistor { name: name.into(), a, b, ohms })
    }

    pub fn capacitor(&mut self, name: &str, a: &str, b: &str, farads: f64) -> Result<()> {
        let (a, b) = (self.node(a), self.node(b));
        self.add(Element::Capacitor { name: name.into(), a, b, farads })
    }

    pub fn current_source(&mut self, name: &str, from: &str, to: &str, amps: Complex64) -> Result<()> {
        let (from, to) = (self.node(from), self.node(to));
        self.add(Element::CurrentSource { name: name.into(), from, to, amps })
    }

    pub fn voltage_source(&mut self, name: &str, pos: &str, neg: &str, volts: Complex64) -> Result<()> {
        let (pos, neg) = (self.node(pos), self.node(neg));
        self.add(Element::VoltageSource { name: name.into(), pos, neg, volts })
    }

    pub fn opamp(&mut self, name: &str, in_p: &str, in_n: &str, out: &str) -> Result<()> {
        let (in_p, in_n, out) = (self.node(in_p), self.node(in_n), self.node(out));
        self.add(Element::OpAmp { name: name.into(), in_p, in_n, out, gain: None })
    }

    /// Sets the amplitude of the source called `name`.
    pub fn set_source(&mut self, name: &str, value: Complex64) -> Result<()> {
        match self.elements.iter_mut().find(|e| e.name() == name) {
            Some(Element::CurrentSource { amps, .. }) => *amps = value,
            Some(Element::VoltageSource { volts, .. }) => *volts = value,
            Some(_) => return Err(Error::Netlist(format!("`{name}` is not a source"))),
            None => return Err(Error::Netlist(format!("no element `{name}`"))),
        }
        Ok(())
    }

    /// Copy with every source set to zero.
    pub fn quiet(&self) -> Netlist {
        let mut out = self.clone();
        for e in &mut out.elements {
            match e {
                Element::CurrentSource { amps, .. } => *amps = Complex64::new(0.0, 0.0),
                Element::VoltageSource { volts, .. } => *volts = Complex64::new(0.0, 0.0),
                _ => {}
            }
        }
        out
    }

    /// Copy with every op amp replaced by a finite-gain VCVS.
    pub fn with_finite_gain(&self, gain: f64) -> Netlist {
        let mut out = self.clone();
        for e in &mut out.elements {
            if let Element::OpAmp { gain: g, .. } = e {
                *g = Some(gain);
            }
        }
        out
    }

    /// Checks that every node reaches ground through some element.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.elements {
            let nodes = e.nodes();
            for w in nodes.windows(2) {
                let (a, b) = (find(&mut parent, w[0].0), find(&mut parent, w[1].0));
                parent[a] = b;
            }
        }
        let root = find(&mut parent, 0);
        for i in 1..n {
            if find(&mut parent, i) != root {
                return Err(Error::Netlist(format!("node `{}` is not connected to ground", self.nodes[i])));
            }
        }
        Ok(())
    }

    /// Element list with node names, for snapshots and debugging.
    pub fn to_json(&self) -> serde_json::Value {
        let name = |id: NodeId| self.nodes[id.0].clone();
        let c = |z: Complex64| json!([z.re, z.im]);
        let elements: Vec<_> = self
            .elements
            .iter()
            .map(|e| match e {
                Element::Resistor { name: n, a, b, ohms } => {
                    json!({"kind": "resistor", "name": n, "nodes": [name(*a), name(*b)], "value": ohms})
                }
                Element::Capacitor { name: n, a, b, farads } => {
                    json!({"kind": "capacitor", "name": n, "nodes": [name(*a), name(*b)], "value": farads})
                }
                Element::CurrentSource { name: n, from, to, amps } => {
                    json!({"kind": "current_source", "name": n, "nodes": [name(*from), name(*to)], "value": c(*amps)})
                }
                Element::VoltageSource { name: n, pos, neg, volts } => {
                    json!({"kind": "voltage_source", "name": n, "nodes": [name(*pos), name(*neg)], "value": c(*volts)})
                }
                Element::OpAmp { name: n, in_p, in_n, out, gain } => {
                    json!({"kind": "opamp", "name": n, "nodes": [name(*in_p), name(*in_n), name(*out)], "value": gain})
                }
            })
            .collect();
        json!({ "nodes": self.nodes, "elements": elements })
    }
}
