//! Dense complex modified nodal analysis.
//!
//! Unknowns are the non-ground node voltages followed by one branch current
//! per voltage source and per op amp. An ideal op amp contributes the nullor
//! pair: its output current is a free unknown and its row forces
//! v(+) = v(-).

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use super::netlist::{Element, Netlist, NodeId};
use crate::error::{check_freq, Error, Result};

/// Condition number above which a solve logs a warning.
pub const CONDITION_WARN: f64 = 1e12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Node voltages (and branch currents) at one frequency.
#[derive(Debug, Clone)]
pub struct AcSolution {
    pub freq: f64,
    /// Indexed by `NodeId`; entry 0 is ground and is exactly zero.
    pub node_voltages: Vec<Complex64>,
    /// Branch current of each voltage source / op amp, by element name.
    pub branch_currents: HashMap<String, Complex64>,
    /// Largest KCL residual over the nodes not tied to a voltage source,
    /// relative to the sum of current magnitudes at that node.
    pub residual: f64,
}

impl AcSolution {
    pub fn voltage(&self, node: NodeId) -> Complex64 {
        self.node_voltages[node.0]
    }

    /// Voltage at the node called `name`.
    pub fn voltage_at(&self, netlist: &Netlist, name: &str) -> Result<Complex64> {
        let id = netlist
            .node_id(name)
            .ok_or_else(|| Error::Netlist(format!("no node `{name}`")))?;
        Ok(self.voltage(id))
    }
}

/// Row-equilibrated LU factorisation with partial pivoting.
struct Lu {
    n: usize,
    a: Vec<Complex64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Vec<Complex64>, n: usize, freq: f64) -> Result<Self> {
        let col_scale: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|i| a[i * n + j].norm()).fold(0.0, f64::max))
            .collect();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, best) = (k..n)
                .map(|i| (i, a[i * n + k].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best == 0.0 || best <= 1e-13 * col_scale[k] {
                return Err(Error::SingularMatrix { freq, row: k, pivot: best });
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = a[k * n + k];
            for i in (k + 1)..n {
                let factor = a[i * n + k] / pivot;
                if factor == ZERO {
                    continue;
                }
                a[i * n + k] = factor;
                for j in (k + 1)..n {
                    let t = a[k * n + j];
                    a[i * n + j] -= factor * t;
                }
            }
        }
        Ok(Self { n, a, perm })
    }

    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let t = self.a[i * n + j] * x[j];
                x[i] -= t;
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let t = self.a[i * n + j] * x[j];
                x[i] -= t;
            }
            x[i] /= self.a[i * n + i];
        }
        x
    }
}

/// Assembled and factored nodal system of a netlist at one frequency.
///
/// Sources only enter the right-hand side, so one factorisation serves any
/// number of excitations (superposition, per-source noise).
pub struct AcSystem<'n> {
    netlist: &'n Netlist,
    freq: f64,
    size: usize,
    matrix: Vec<Complex64>,
    row_scale: Vec<f64>,
    branch_index: HashMap<String, usize>,
    kcl_rows: Vec<bool>,
    lu: Lu,
}

impl<'n> AcSystem<'n> {
    pub fn assemble(netlist: &'n Netlist, freq: f64) -> Result<Self> {
        check_freq(freq)?;
        netlist.validate()?;
        let nv = netlist.node_count() - 1;
        let mut branch_index = HashMap::new();
        for e in netlist.elements() {
            if e.has_branch() {
                let k = nv + branch_index.len();
                branch_index.insert(e.name().to_string(), k);
            }
        }
        let size = nv + branch_index.len();
        if size == 0 {
            return Err(Error::Netlist("empty netlist".into()));
        }
        let mut m = vec![ZERO; size * size];
        let idx = |node: NodeId| (!node.is_ground()).then(|| node.0 - 1);
        let mut add = |r: Option<usize>, c: Option<usize>, v: Complex64| {
            if let (Some(r), Some(c)) = (r, c) {
                m[r * size + c] += v;
            }
        };
        let w = 2.0 * PI * freq;
        for e in netlist.elements() {
            match *e {
                Element::Resistor { a, b, ohms, .. } => {
                    stamp_admittance(&mut add, idx(a), idx(b), Complex64::new(1.0 / ohms, 0.0))
                }
                Element::Capacitor { a, b, farads, .. } => {
                    stamp_admittance(&mut add, idx(a), idx(b), Complex64::new(0.0, w * farads))
                }
                Element::CurrentSource { .. } => {}
                Element::VoltageSource { ref name, pos, neg, .. } => {
                    let k = Some(branch_index[name]);
                    let one = Complex64::new(1.0, 0.0);
                    add(idx(pos), k, one);
                    add(idx(neg), k, -one);
                    add(k, idx(pos), one);
                    add(k, idx(neg), -one);
                }
                Element::OpAmp { ref name, in_p, in_n, out, gain } => {
                    let k = Some(branch_index[name]);
                    let one = Complex64::new(1.0, 0.0);
                    // Output current enters the system at `out`.
                    add(idx(out), k, -one);
                    add(k, idx(in_p), one);
                    add(k, idx(in_n), -one);
                    if let Some(g) = gain {
                        // (v+ - v-) - v_out/g = 0
                        add(k, idx(out), Complex64::new(-1.0 / g, 0.0));
                    }
                }
            }
        }
        let row_scale: Vec<f64> = (0..size)
            .map(|i| {
                let s = (0..size).map(|j| m[i * size + j].norm()).fold(0.0, f64::max);
                if s > 0.0 {
                    1.0 / s
                } else {
                    1.0
                }
            })
            .collect();
        let mut scaled = m.clone();
        for i in 0..size {
            for j in 0..size {
                scaled[i * size + j] *= row_scale[i];
            }
        }
        let lu = Lu::factor(scaled, size, freq)?;
        let mut kcl_rows = vec![false; size];
        kcl_rows[..nv].iter_mut().for_each(|k| *k = true);
        for e in netlist.elements() {
            if let Element::VoltageSource { pos, neg, .. } = *e {
                for node in [pos, neg] {
                    if let Some(i) = idx(node) {
                        kcl_rows[i] = false;
                    }
                }
            }
        }
        Ok(Self {
            netlist,
            freq,
            size,
            matrix: m,
            row_scale,
            branch_index,
            kcl_rows,
            lu,
        })
    }

    pub fn freq(&self) -> f64 {
        self.freq
    }

    /// Right-hand side with only the listed sources driven; every other
    /// source in the netlist is treated as zero.
    pub fn rhs(&self, excitations: &[(&str, Complex64)]) -> Result<Vec<Complex64>> {
        let mut b = vec![ZERO; self.size];
        for &(name, value) in excitations {
            let e = self
                .netlist
                .element(name)
                .ok_or_else(|| Error::Netlist(format!("no element `{name}`")))?;
            self.stamp_source(&mut b, e, value)?;
        }
        Ok(b)
    }

    /// Right-hand side from the amplitudes stored in the netlist.
    pub fn netlist_rhs(&self) -> Vec<Complex64> {
        let mut b = vec![ZERO; self.size];
        for e in self.netlist.elements() {
            let value = match *e {
                Element::CurrentSource { amps, .. } => amps,
                Element::VoltageSource { volts, .. } => volts,
                _ => continue,
            };
            self.stamp_source(&mut b, e, value).expect("element is a source");
        }
        b
    }

    fn stamp_source(&self, b: &mut [Complex64], e: &Element, value: Complex64) -> Result<()> {
        match *e {
            Element::CurrentSource { from, to, .. } => {
                if !to.is_ground() {
                    b[to.0 - 1] += value;
                }
                if !from.is_ground() {
                    b[from.0 - 1] -= value;
                }
            }
            Element::VoltageSource { ref name, .. } => b[self.branch_index[name]] += value,
            _ => return Err(Error::Netlist(format!("`{}` is not a source", e.name()))),
        }
        Ok(())
    }

    pub fn solve(&self, b: &[Complex64]) -> AcSolution {
        let scaled: Vec<Complex64> = b.iter().zip(&self.row_scale).map(|(v, s)| v * s).collect();
        let x = self.lu.solve(&scaled);
        let n = self.size;
        let mut residual: f64 = 0.0;
        for i in 0..n {
            let mut r = -b[i];
            let mut mag = b[i].norm();
            for j in 0..n {
                let t = self.matrix[i * n + j] * x[j];
                r += t;
                mag += t.norm();
            }
            if mag > 0.0 && self.kcl_rows[i] {
                residual = residual.max(r.norm() / mag);
            }
        }
        let nv = self.netlist.node_count() - 1;
        let mut node_voltages = Vec::with_capacity(nv + 1);
        node_voltages.push(ZERO);
        node_voltages.extend_from_slice(&x[..nv]);
        let branch_currents = self
            .branch_index
            .iter()
            .map(|(name, &k)| (name.clone(), x[k]))
            .collect();
        AcSolution {
            freq: self.freq,
            node_voltages,
            branch_currents,
            residual,
        }
    }

    /// 1-norm condition number of the row-equilibrated matrix.
    pub fn condition(&self) -> f64 {
        let n = self.size;
        let scaled = |i: usize, j: usize| self.matrix[i * n + j] * self.row_scale[i];
        let norm_a = (0..n)
            .map(|j| (0..n).map(|i| scaled(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut norm_inv: f64 = 0.0;
        let mut e = vec![ZERO; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = ZERO);
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.lu.solve(&e);
            norm_inv = norm_inv.max(col.iter().map(|v| v.norm()).sum());
        }
        norm_a * norm_inv
    }
}

fn stamp_admittance(
    add: &mut impl FnMut(Option<usize>, Option<usize>, Complex64),
    a: Option<usize>,
    b: Option<usize>,
    y: Complex64,
) {
    add(a, a, y);
    add(b, b, y);
    add(a, b, -y);
    add(b, a, -y);
}

/// Solves `netlist` at `freq` with its stored source amplitudes.
pub fn solve_ac(netlist: &Netlist, freq: f64) -> Result<AcSolution> {
    let sys = AcSystem::assemble(netlist, freq)?;
    let cond = sys.condition();
    if cond > CONDITION_WARN {
        log::warn!("nodal matrix condition number {cond:.3e} at {freq} Hz");
    }
    Ok(sys.solve(&sys.netlist_rhs()))
}
