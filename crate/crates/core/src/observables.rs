//! Low-temperature contour expansions: the partition function, the two-point
//! parafermionic observables f_a^↑, f_a^↓, multipoint observables f^ε, and a
//! plain spin-configuration enumeration used as an oracle.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{CellKind, Coord2, Dir, Domain, RectangleSpec};
use crate::par::{self, Policy};
use crate::shol_core::{ComplexField, IsingCoupling, I, LAMBDA, ONE, ZERO};

pub const DEFAULT_CAP: usize = 24;
const PREFIX_BITS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TurnRule {
    #[default]
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumOptions {
    pub cap: usize,
    pub policy: Policy,
    pub rule: TurnRule,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions { cap: DEFAULT_CAP, policy: Policy::default(), rule: TurnRule::Left }
    }
}

/// A set of dual edges (bit i = i-th dual edge of the domain) with the faces
/// left at odd parity once the source stubs are accounted for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContourConfig {
    pub edges: u32,
    pub defects: u64,
}

impl ContourConfig {
    pub fn len(&self) -> u32 {
        self.edges.count_ones()
    }

    pub fn is_empty(&self) -> bool {
        self.edges == 0
    }
}

/// e^{−iπk/4}.
pub fn eighth_phase(k: i32) -> Complex64 {
    const R: f64 = std::f64::consts::FRAC_1_SQRT_2;
    const TABLE: [Complex64; 8] = [
        Complex64::new(1.0, 0.0),
        Complex64::new(R, -R),
        Complex64::new(0.0, -1.0),
        Complex64::new(-R, -R),
        Complex64::new(-1.0, 0.0),
        Complex64::new(-R, R),
        Complex64::new(0.0, 1.0),
        Complex64::new(R, R),
    ];
    TABLE[k.rem_euclid(8) as usize]
}

/// Face and dual-edge indexing of a domain for bitmask enumeration.
#[derive(Clone, Debug)]
pub struct ContourIndex<'a> {
    pub domain: &'a Domain,
    face_idx: HashMap<Coord2, usize>,
    dual_of_edge: HashMap<Coord2, usize>,
    dual_faces: Vec<(usize, usize)>,
    closing: Vec<u64>,
    initially_closed: u64,
}

impl<'a> ContourIndex<'a> {
    pub fn new(d: &'a Domain, cap: usize) -> Result<Self> {
        let nd = d.dual_edges().len();
        if nd > cap || nd > 32 {
            return Err(Error::CapExceeded { count: nd, cap: cap.min(32) });
        }
        if d.faces().len() > 64 {
            return Err(Error::CapExceeded { count: d.faces().len(), cap: 64 });
        }
        let face_idx: HashMap<Coord2, usize> = d.faces().iter().enumerate().map(|(i, f)| (*f, i)).collect();
        let mut last = vec![None; d.faces().len()];
        let mut dual_faces = Vec::with_capacity(nd);
        let mut dual_of_edge = HashMap::new();
        for (i, de) in d.dual_edges().iter().enumerate() {
            let (a, b) = (face_idx[&de.a], face_idx[&de.b]);
            dual_faces.push((a, b));
            last[a] = Some(i);
            last[b] = Some(i);
            dual_of_edge.insert(de.crossing(), i);
        }
        let mut closing = vec![0u64; nd];
        let mut initially_closed = 0u64;
        for (f, l) in last.iter().enumerate() {
            match l {
                Some(i) => closing[*i] |= 1 << f,
                None => initially_closed |= 1 << f,
            }
        }
        Ok(ContourIndex { domain: d, face_idx, dual_of_edge, dual_faces, closing, initially_closed })
    }

    pub fn face_bit(&self, f: Coord2) -> Option<u64> {
        self.face_idx.get(&f).map(|i| 1u64 << i)
    }

    pub fn dual_index(&self, edge: Coord2) -> Option<usize> {
        self.dual_of_edge.get(&edge).copied()
    }

    pub fn contains(&self, gamma: u32, edge: Coord2) -> bool {
        self.dual_index(edge).is_some_and(|i| gamma >> i & 1 == 1)
    }

    pub fn mask_of(&self, edges: &[Coord2]) -> Result<u32> {
        let mut m = 0u32;
        for e in edges {
            let i = self.dual_index(*e).ok_or(Error::UnknownEdge(*e))?;
            m |= 1 << i;
        }
        Ok(m)
    }

    pub fn edges_of(&self, gamma: u32) -> Vec<Coord2> {
        self.domain
            .dual_edges()
            .iter()
            .enumerate()
            .filter(|(i, _)| gamma >> i & 1 == 1)
            .map(|(_, de)| de.crossing())
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs<A, F: Fn(&mut A, ContourConfig)>(
        &self,
        i: usize,
        gamma: u32,
        parity: u64,
        decided: u64,
        max_defects: u32,
        acc: &mut A,
        visit: &F,
    ) {
        let nd = self.dual_faces.len();
        if i == nd {
            visit(acc, ContourConfig { edges: gamma, defects: parity });
            return;
        }
        let decided = decided | self.closing[i];
        let (a, b) = self.dual_faces[i];
        for take in [false, true] {
            let (g, p) = if take { (gamma | 1 << i, parity ^ (1 << a) ^ (1 << b)) } else { (gamma, parity) };
            if (p & decided).count_ones() <= max_defects {
                self.dfs(i + 1, g, p, decided, max_defects, acc, visit);
            }
        }
    }

    /// Visits every γ whose parity, flipped at `stubs`, is odd on at most `max_defects` faces.
    /// Work is split over fixed prefixes; the per-prefix accumulators are returned in prefix order.
    pub fn for_each<A, I, F>(&self, stubs: u64, max_defects: u32, policy: Policy, init: I, visit: F) -> Vec<A>
    where
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, ContourConfig) + Sync,
    {
        let nd = self.dual_faces.len();
        let depth = nd.min(PREFIX_BITS);
        let decided0 = self.initially_closed;
        if (stubs & decided0).count_ones() > max_defects {
            return vec![init()];
        }
        let mut prefixes = Vec::new();
        self.collect_prefixes(0, depth, 0, stubs, decided0, max_defects, &mut prefixes);
        par::map(policy, &prefixes, |&(gamma, parity, decided)| {
            let mut acc = init();
            self.dfs(depth, gamma, parity, decided, max_defects, &mut acc, &visit);
            acc
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn collect_prefixes(
        &self,
        i: usize,
        depth: usize,
        gamma: u32,
        parity: u64,
        decided: u64,
        max_defects: u32,
        out: &mut Vec<(u32, u64, u64)>,
    ) {
        if i == depth {
            out.push((gamma, parity, decided));
            return;
        }
        let decided = decided | self.closing[i];
        let (a, b) = self.dual_faces[i];
        for take in [false, true] {
            let (g, p) = if take { (gamma | 1 << i, parity ^ (1 << a) ^ (1 << b)) } else { (gamma, parity) };
            if (p & decided).count_ones() <= max_defects {
                self.collect_prefixes(i + 1, depth, g, p, decided, max_defects, out);
            }
        }
    }

    /// Walks from `start` heading `dir` along unused dual edges of γ until it leaves
    /// through one of the available target stubs. Returns the target and the quarter-turn count.
    #[allow(clippy::too_many_arguments)]
    pub fn walk(
        &self,
        gamma: u32,
        used: &mut u32,
        start: Coord2,
        dir: Dir,
        targets: &[(Coord2, Dir)],
        available: &[bool],
        rule: TurnRule,
    ) -> Result<(usize, i32)> {
        let mut f = start;
        let mut d = dir;
        let mut wq = 0i32;
        let limit = 4 * self.dual_faces.len() + 8;
        for _ in 0..limit {
            let mut cands: [(Option<Dir>, Option<usize>, Option<usize>); 3] = [(None, None, None); 3];
            let mut nc = 0;
            for nd in Dir::ALL {
                if nd == d.opposite() {
                    continue;
                }
                if let Some(j) = (0..targets.len()).find(|&j| available[j] && targets[j] == (f, nd)) {
                    cands[nc] = (Some(nd), Some(j), None);
                    nc += 1;
                } else if let Some(i) = self.dual_index(f.step(nd)) {
                    if gamma >> i & 1 == 1 && *used >> i & 1 == 0 {
                        cands[nc] = (Some(nd), None, Some(i));
                        nc += 1;
                    }
                }
            }
            let pick = match nc {
                0 => return Err(Error::WalkFailed(format!("stuck at face {f}"))),
                1 => cands[0],
                _ => {
                    let pref = match rule {
                        TurnRule::Left => Dir::from_index(d.index() + 1),
                        TurnRule::Right => Dir::from_index(d.index() + 3),
                    };
                    *cands[..nc]
                        .iter()
                        .find(|c| c.0 == Some(pref))
                        .ok_or_else(|| Error::WalkFailed(format!("no {rule:?} turn at face {f}")))?
                }
            };
            let nd = pick.0.expect("candidate direction");
            wq += match (nd.index() - d.index()).rem_euclid(4) {
                1 => 1,
                3 => -1,
                _ => 0,
            };
            d = nd;
            if let Some(j) = pick.1 {
                return Ok((j, wq));
            }
            *used |= 1 << pick.2.expect("edge candidate");
            f = f.step(nd).step(nd);
        }
        Err(Error::WalkFailed("path does not close".into()))
    }
}

/// 𝒵 = Σ_ω α^{|ω|} over even subgraphs of the dual graph.
pub fn partition_function_contour(d: &Domain, k: &IsingCoupling) -> Result<f64> {
    partition_function_contour_with(d, k, EnumOptions::default())
}

pub fn partition_function_contour_with(d: &Domain, k: &IsingCoupling, opts: EnumOptions) -> Result<f64> {
    let idx = ContourIndex::new(d, opts.cap)?;
    let nd = d.dual_edges().len();
    let parts = idx.for_each(0, 0, opts.policy, || vec![0u64; nd + 1], |acc, c| acc[c.len() as usize] += 1);
    Ok(length_polynomial(&parts, k.alpha))
}

/// Σ_L count(L) α^L from per-task length histograms, summed in a fixed order.
fn length_polynomial(parts: &[Vec<u64>], alpha: f64) -> f64 {
    let n = parts.first().map_or(0, Vec::len);
    (0..n).map(|l| parts.iter().map(|p| p[l]).sum::<u64>() as f64 * alpha.powi(l as i32)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stub {
    Up,
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourceSpec {
    pub edge: Coord2,
    pub stub: Stub,
}

/// f_a^↑ (stub up) or f_a^↓ (stub down) at every edge z ≠ a.
pub fn two_point_observable(d: &Domain, src: SourceSpec, k: &IsingCoupling) -> Result<ComplexField> {
    two_point_observable_with(d, src, k, EnumOptions::default())
}

pub fn two_point_observable_with(
    d: &Domain,
    src: SourceSpec,
    k: &IsingCoupling,
    opts: EnumOptions,
) -> Result<ComplexField> {
    let a = src.edge;
    if a.kind() != CellKind::HorizontalEdge || !d.contains_edge(a) {
        return Err(Error::InvalidPosition(format!("{a} is not a horizontal edge of the domain")));
    }
    let idx = ContourIndex::new(d, opts.cap)?;
    let z_part = partition_function_contour_with(d, k, opts)?;
    let sd = match src.stub {
        Stub::Up => Dir::N,
        Stub::Down => Dir::S,
    };
    let sf = a.step(sd);
    let mut out: ComplexField = d.edges().iter().filter(|e| **e != a).map(|e| (*e, ZERO)).collect();
    let Some(sbit) = idx.face_bit(sf) else {
        return Ok(out);
    };
    let extra = if src.stub == Stub::Down { -I } else { ONE };
    let nd = d.dual_edges().len();
    let faces = d.faces();
    // Per target edge: counts of (length, quarter-turns mod 8).
    type Hist = BTreeMap<Coord2, Vec<[u64; 8]>>;
    let parts: Vec<std::result::Result<Hist, Error>> = idx.for_each(
        sbit,
        1,
        opts.policy,
        || Ok(Hist::new()),
        |acc, c| {
            let Ok(hist) = acc else { return };
            if idx.contains(c.edges, a) {
                return;
            }
            let pz = if c.defects == 0 { sf } else { faces[c.defects.trailing_zeros() as usize] };
            for td in Dir::ALL {
                let z = pz.step(td);
                if z == a || idx.contains(c.edges, z) {
                    continue;
                }
                let mut used = 0u32;
                match idx.walk(c.edges, &mut used, sf, sd, &[(pz, td)], &[true], opts.rule) {
                    Ok((_, wq)) => {
                        let h = hist.entry(z).or_insert_with(|| vec![[0u64; 8]; nd + 2]);
                        h[c.len() as usize + 1][wq.rem_euclid(8) as usize] += 1;
                    }
                    Err(e) => {
                        *acc = Err(e);
                        return;
                    }
                }
            }
        },
    );
    let mut merged: BTreeMap<Coord2, Vec<[u64; 8]>> = BTreeMap::new();
    for p in parts {
        for (z, h) in p? {
            let m = merged.entry(z).or_insert_with(|| vec![[0u64; 8]; nd + 2]);
            for (row, add) in m.iter_mut().zip(&h) {
                for (x, y) in row.iter_mut().zip(add) {
                    *x += y;
                }
            }
        }
    }
    for (z, h) in merged {
        let mut v = ZERO;
        for (len, row) in h.iter().enumerate() {
            let w = k.alpha.powi(len as i32);
            for (q, cnt) in row.iter().enumerate() {
                if *cnt > 0 {
                    v += eighth_phase(q as i32) * (w * *cnt as f64);
                }
            }
        }
        out.insert(z, v * extra / z_part);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PhaseConvention {
    /// e^{+iW/2}: matches ⟨ψ^{↕}(z_{2m})⋯ψ^{↕}(z_1)⟩.
    #[default]
    Operator,
    /// e^{−iW/2}: the convention of the two-point observables; used for g.
    Holomorphic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiSource {
    pub edge: Coord2,
    /// Stub direction from the edge into its face.
    pub orientation: Dir,
    /// A square root of the orientation as a unit complex number.
    pub epsilon: Complex64,
}

impl MultiSource {
    pub fn new(edge: Coord2, orientation: Dir, epsilon: Complex64) -> Result<Self> {
        let ok_dir = match edge.kind() {
            CellKind::HorizontalEdge => matches!(orientation, Dir::N | Dir::S),
            CellKind::VerticalEdge => matches!(orientation, Dir::E | Dir::W),
            _ => return Err(Error::InvalidPosition(format!("{edge} is not an edge"))),
        };
        if !ok_dir {
            return Err(Error::InvalidArgument(format!("orientation {orientation:?} does not cross {edge}")));
        }
        if (epsilon * epsilon - orientation.unit()).norm() > 1e-12 {
            return Err(Error::InvalidArgument(format!("{epsilon} is not a square root of {}", orientation.unit())));
        }
        Ok(MultiSource { edge, orientation, epsilon })
    }

    /// ψ↑-type source: stub up, ε = λ.
    pub fn up(edge: Coord2) -> Result<Self> {
        Self::new(edge, Dir::N, LAMBDA)
    }

    /// ψ↓-type source: stub down, ε = λ³.
    pub fn down(edge: Coord2) -> Result<Self> {
        Self::new(edge, Dir::S, LAMBDA.powi(3))
    }

    /// The two orientations of an edge with their canonical roots.
    pub fn both(edge: Coord2) -> Result<[Self; 2]> {
        match edge.kind() {
            CellKind::HorizontalEdge => Ok([Self::up(edge)?, Self::down(edge)?]),
            CellKind::VerticalEdge => Ok([Self::new(edge, Dir::E, ONE)?, Self::new(edge, Dir::W, I)?]),
            _ => Err(Error::InvalidPosition(format!("{edge} is not an edge"))),
        }
    }

    fn stub_face(&self) -> Coord2 {
        self.edge.step(self.orientation)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathData {
    /// (source, destination) index pairs, source < destination.
    pub pairs: Vec<(usize, usize)>,
    pub quarter_turns: Vec<i32>,
    pub crossings: usize,
}

impl PathData {
    pub fn crossing_sign(&self) -> f64 {
        if self.crossings % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

fn walk_all(idx: &ContourIndex, gamma: u32, sources: &[(Coord2, Dir)], rule: TurnRule) -> Result<PathData> {
    let m2 = sources.len();
    let targets: Vec<(Coord2, Dir)> = sources.iter().map(|(f, o)| (*f, o.opposite())).collect();
    let mut available = vec![true; m2];
    let mut used = 0u32;
    let mut pairs = Vec::new();
    let mut quarter_turns = Vec::new();
    while let Some(s) = (0..m2).find(|&j| available[j]) {
        available[s] = false;
        let (t, wq) = idx.walk(gamma, &mut used, sources[s].0, sources[s].1, &targets, &available, rule)?;
        available[t] = false;
        pairs.push((s, t));
        quarter_turns.push(wq);
    }
    let mut crossings = 0;
    for (i, &(a, b)) in pairs.iter().enumerate() {
        for &(c, d) in &pairs[i + 1..] {
            if (a < c && c < b && b < d) || (c < a && a < d && d < b) {
                crossings += 1;
            }
        }
    }
    Ok(PathData { pairs, quarter_turns, crossings })
}

/// Pairs the source stubs through γ and reports windings and crossings.
/// `sources` are (edge, stub direction into the domain).
pub fn extract_paths(d: &Domain, gamma: &[Coord2], sources: &[(Coord2, Dir)], rule: TurnRule) -> Result<PathData> {
    let idx = ContourIndex::new(d, 32)?;
    let mask = idx.mask_of(gamma)?;
    let faces: Vec<(Coord2, Dir)> = sources.iter().map(|(e, o)| (e.step(*o), *o)).collect();
    for (f, _) in &faces {
        if !d.contains_face(*f) {
            return Err(Error::InvalidPosition(format!("stub face {f} outside the domain")));
        }
    }
    walk_all(&idx, mask, &faces, rule)
}

/// f^ε(z_1, …, z_{2m}): α^{|γ|+m} · sign · Π (ε_d/ε_s) e^{±iW/2} summed over γ, divided by 𝒵.
pub fn multipoint_observable(
    d: &Domain,
    sources: &[MultiSource],
    k: &IsingCoupling,
    conv: PhaseConvention,
) -> Result<Complex64> {
    multipoint_observable_with(d, sources, k, conv, EnumOptions::default())
}

pub fn multipoint_observable_with(
    d: &Domain,
    sources: &[MultiSource],
    k: &IsingCoupling,
    conv: PhaseConvention,
    opts: EnumOptions,
) -> Result<Complex64> {
    let m2 = sources.len();
    if m2 == 0 || m2 % 2 == 1 {
        return Err(Error::InvalidArgument(format!("{m2} sources; need a positive even count")));
    }
    for s in sources {
        if !d.contains_edge(s.edge) {
            return Err(Error::InvalidPosition(format!("{} is not an edge of the domain", s.edge)));
        }
    }
    for (i, s) in sources.iter().enumerate() {
        if sources[..i].iter().any(|t| t.edge == s.edge) {
            return Err(Error::InvalidArgument(format!("repeated source {}", s.edge)));
        }
    }
    let idx = ContourIndex::new(d, opts.cap)?;
    let z_part = partition_function_contour_with(d, k, opts)?;
    let mut stubs = 0u64;
    let mut starts = Vec::with_capacity(m2);
    for s in sources {
        let f = s.stub_face();
        match idx.face_bit(f) {
            Some(b) => stubs ^= b,
            None => return Ok(ZERO),
        }
        starts.push((f, s.orientation));
    }
    let sign = match conv {
        PhaseConvention::Operator => -1,
        PhaseConvention::Holomorphic => 1,
    };
    let m = (m2 / 2) as i32;
    let parts = idx.for_each(
        stubs,
        0,
        opts.policy,
        || Ok((ZERO, 0usize)),
        |acc: &mut Result<(Complex64, usize)>, c| {
            let Ok((sum, _)) = acc else { return };
            if sources.iter().any(|s| idx.contains(c.edges, s.edge)) {
                return;
            }
            match walk_all(&idx, c.edges, &starts, opts.rule) {
                Ok(p) => {
                    let mut w = Complex64::from(k.alpha.powi(c.len() as i32 + m) * p.crossing_sign());
                    for (&(s, t), &wq) in p.pairs.iter().zip(&p.quarter_turns) {
                        w *= sources[t].epsilon / sources[s].epsilon * eighth_phase(sign * wq);
                    }
                    *sum += w;
                }
                Err(e) => *acc = Err(e),
            }
        },
    );
    let mut total = ZERO;
    for p in parts {
        total += p?.0;
    }
    Ok(total / z_part)
}

/// g(z) = i^{m−1}·((λ/ε) f^ε + (λ/ε̃) f^{ε̃}) over the two orientations of the last point z.
/// The factor i^{m−1} makes g s-holomorphic at β_c with the Holomorphic convention.
pub fn observable_combination_g(
    d: &Domain,
    sources: &[MultiSource],
    z: Coord2,
    k: &IsingCoupling,
    conv: PhaseConvention,
) -> Result<Complex64> {
    observable_combination_g_with(d, sources, MultiSource::both(z)?, k, conv, EnumOptions::default())
}

pub fn observable_combination_g_with(
    d: &Domain,
    sources: &[MultiSource],
    last: [MultiSource; 2],
    k: &IsingCoupling,
    conv: PhaseConvention,
    opts: EnumOptions,
) -> Result<Complex64> {
    let mut total = ZERO;
    for s in last {
        let mut all = sources.to_vec();
        all.push(s);
        total += LAMBDA / s.epsilon * multipoint_observable_with(d, &all, k, conv, opts)?;
    }
    Ok(total * I.powi(sources.len() as i32 / 2))
}

/// Exact plus-boundary spin enumeration on a box.
#[derive(Clone, Debug)]
pub struct SpinEnumeration {
    /// Σ e^{β Σ σσ} over free interior spins.
    pub z_plus: f64,
    /// ⟨Π σ⟩ for each probe set, in input order.
    pub correlations: Vec<f64>,
}

pub const SPIN_ENUM_CAP: usize = 20;

pub fn spin_enum_oracle(spec: RectangleSpec, k: &IsingCoupling, probes: &[Vec<Coord2>]) -> Result<SpinEnumeration> {
    let (w, h) = (spec.width, spec.height);
    if w < 3 || h < 2 {
        return Err(Error::DimensionTooSmall(format!("{w}x{h} box")));
    }
    let free = (w - 2) * h.saturating_sub(2);
    if free > SPIN_ENUM_CAP {
        return Err(Error::CapExceeded { count: free, cap: SPIN_ENUM_CAP });
    }
    for set in probes {
        for v in set {
            if v.kind() != CellKind::Vertex || v.x2 < 0 || v.y2 < 0 || v.x2 / 2 >= w as i32 || v.y2 / 2 >= h as i32 {
                return Err(Error::InvalidPosition(format!("{v} is not a vertex of the box")));
            }
        }
    }
    let site = |x: usize, y: usize| -> Option<usize> {
        (x > 0 && x + 1 < w && y > 0 && y + 1 < h).then(|| (y - 1) * (w - 2) + (x - 1))
    };
    let spin = |mask: u32, x: usize, y: usize| -> f64 {
        match site(x, y) {
            Some(i) if mask >> i & 1 == 1 => -1.0,
            _ => 1.0,
        }
    };
    let mut z = 0.0;
    let mut sums = vec![0.0; probes.len()];
    for mask in 0u32..(1u32 << free) {
        let mut e = 0.0;
        for y in 0..h {
            for x in 0..w {
                let s = spin(mask, x, y);
                if x + 1 < w {
                    e += s * spin(mask, x + 1, y);
                }
                if y + 1 < h {
                    e += s * spin(mask, x, y + 1);
                }
            }
        }
        let wgt = (k.beta * e).exp();
        z += wgt;
        for (acc, set) in sums.iter_mut().zip(probes) {
            let p: f64 = set.iter().map(|v| spin(mask, (v.x2 / 2) as usize, (v.y2 / 2) as usize)).product();
            *acc += wgt * p;
        }
    }
    Ok(SpinEnumeration { z_plus: z, correlations: sums.iter().map(|s| s / z).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_rectangle, RectangleSpec};
    use std::f64::consts::PI;

    #[test]
    fn phase_table() {
        for k in -9..9 {
            let expect = Complex64::from_polar(1.0, -PI / 4.0 * k as f64);
            assert!((eighth_phase(k) - expect).norm() < 1e-15);
        }
    }

    #[test]
    fn single_face_partition_function() {
        let d = build_rectangle(RectangleSpec::new(3, 2)).unwrap();
        let single = crate::lattice::build_from_faces(&[d.faces()[0]]).unwrap();
        let z = partition_function_contour(&single, &IsingCoupling::new(0.4).unwrap()).unwrap();
        assert_eq!(z, 1.0);
    }

    #[test]
    fn two_by_two_partition_function() {
        let d = build_rectangle(RectangleSpec::new(3, 3)).unwrap();
        let k = IsingCoupling::new(0.4).unwrap();
        let z = partition_function_contour(&d, &k).unwrap();
        assert!((z - (1.0 + k.alpha.powi(4))).abs() < 1e-15);
    }

    #[test]
    fn cap_is_enforced() {
        let d = build_rectangle(RectangleSpec::new(4, 4)).unwrap();
        let opts = EnumOptions { cap: 5, ..EnumOptions::default() };
        assert!(matches!(
            partition_function_contour_with(&d, &IsingCoupling::critical(), opts),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn epsilon_must_square_to_orientation() {
        assert!(MultiSource::new(Coord2::new(1, 0), Dir::N, ONE).is_err());
        assert!(MultiSource::new(Coord2::new(1, 0), Dir::E, ONE).is_err());
        assert!(MultiSource::new(Coord2::new(1, 0), Dir::N, -LAMBDA).is_ok());
    }
}
