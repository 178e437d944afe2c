//! The acceptance checks, each returning a pass/fail verdict with the numbers behind it.

use crate::bulk::{
    bulk_gap, check_no_fold, dirac_point_data, find_dirac_point, fit_fermi_velocity, mat2_distance, pairing_model, DiracOptions,
    DiracPointData, Flavor, Perturbation,
};
use crate::dirac1d::{
    bound_states, dispersion_zero_branch, valley_symmetry_report, BoundStateOptions, DiracGrid, EffectiveDiracModel,
};
use crate::edge::{
    armchair_pair_splitting, correspondence_check, edge_states_at, fit_order, residual_order, spectral_flow_default, EdgeSetup,
    FilterOptions, ZeroModeEnvelope, EIGEN_WIDTHS,
};
use crate::error::Result;
use crate::lattice::{build_lattice, edge_frame, LatticeBasis, Valley};
use crate::linalg::lanczos::InteriorOptions;
use crate::potentials::{default_a, default_honeycomb_v, default_w, tanh_wall, FourierPotential};
use serde::Serialize;
use std::time::Instant;

#[derive(Clone, Debug)]
pub struct ValidationConfig {
    pub v0: f64,
    pub w0: f64,
    pub a0: f64,
    /// plane-wave cutoff for the bulk checks
    pub bulk_cutoff: usize,
    /// plane-wave cutoff for the Dirac data feeding edge runs
    pub edge_cutoff: usize,
    pub deltas: Vec<f64>,
    pub flow_delta: f64,
    pub pair_deltas: Vec<f64>,
    pub solver: InteriorOptions,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            v0: 10.0,
            w0: 1.0,
            a0: 1.0,
            bulk_cutoff: 12,
            edge_cutoff: 8,
            deltas: vec![0.4, 0.2, 0.1],
            flow_delta: 0.3,
            pair_deltas: vec![0.4, 0.2],
            solver: InteriorOptions::default(),
        }
    }
}

/// One named pass/fail condition inside a criterion.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
}

fn check(name: &'static str, passed: bool) -> Check {
    Check { name, passed }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn failed_checks(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }
}

type Outcome = (Vec<Check>, String);

/// A sub-check that fails for a recorded reason rather than a defect.
#[derive(Clone, Copy, Debug)]
pub struct KnownConflict {
    pub criterion: u8,
    pub check: &'static str,
    pub reason: &'static str,
}

/// The closed form for the zero branch disagrees in sign with the operator it describes.
pub const KNOWN_CONFLICTS: &[KnownConflict] = &[KnownConflict {
    criterion: 6,
    check: "printed j = 0 formula",
    reason: "the closed form -mu v_F sgn(theta)/|K2| has the opposite sign to the zero-branch eigenvalue \
             of v sigma_1 D_s + (v mu/|K2|) sigma_2 + theta kappa sigma_3; the ribbon spectrum follows the operator",
}];

pub fn known_conflict(criterion: u8, check: &str) -> Option<&'static KnownConflict> {
    KNOWN_CONFLICTS.iter().find(|k| k.criterion == criterion && k.check == check)
}

/// Perturbation field of the given amplitude; zero amplitude gives the zero field, which the
/// nondegeneracy gate then rejects.
fn field_or_zero(amp: f64, make: fn(f64) -> Result<FourierPotential<f64>>) -> Result<FourierPotential<f64>> {
    if amp == 0.0 {
        Ok(FourierPotential::zero())
    } else {
        make(amp)
    }
}

pub const CRITERIA: [(u8, &str); 13] = [
    (1, "Dirac point"),
    (2, "Fermi velocity consistency"),
    (3, "gauge relations"),
    (4, "coupling symmetries"),
    (5, "bulk gap law"),
    (6, "1D Dirac closed forms"),
    (7, "valley symmetry of Dirac spectra"),
    (8, "edge-Dirac correspondence"),
    (9, "multiscale residual"),
    (10, "conjugation symmetry of edge curves"),
    (11, "spectral flow"),
    (12, "armchair pairing"),
    (13, "no-fold gate"),
];

/// Shared inputs: the default potentials and Dirac data at both cutoffs.
pub struct ValidationContext {
    pub config: ValidationConfig,
    pub lattice: LatticeBasis<f64>,
    pub potential: FourierPotential<f64>,
    pub w: FourierPotential<f64>,
    pub a: FourierPotential<f64>,
    pub bulk: DiracPointData<f64>,
    pub edge: DiracPointData<f64>,
}

impl ValidationContext {
    pub fn new(config: ValidationConfig) -> Result<Self> {
        let lattice = build_lattice::<f64>();
        let potential = default_honeycomb_v(config.v0)?;
        let w = field_or_zero(config.w0, default_w)?;
        let a = field_or_zero(config.a0, default_a)?;
        let opts = DiracOptions::default();
        let bulk = dirac_point_data(&lattice, &potential, Some(&w), Some(&a), config.bulk_cutoff, &opts)?;
        let edge = dirac_point_data(&lattice, &potential, Some(&w), Some(&a), config.edge_cutoff, &opts)?;
        Ok(Self { config, lattice, potential, w, a, bulk, edge })
    }

    pub fn field(&self, flavor: Flavor) -> &FourierPotential<f64> {
        match flavor {
            Flavor::PBreaking => &self.w,
            Flavor::CBreaking => &self.a,
        }
    }

    pub fn setup(&self, flavor: Flavor, frame: (i64, i64)) -> Result<EdgeSetup<f64>> {
        EdgeSetup::new(
            self.lattice.clone(),
            self.potential.clone(),
            flavor,
            self.field(flavor).clone(),
            tanh_wall(),
            edge_frame(&self.lattice, frame.0, frame.1)?,
            self.edge.clone(),
        )
    }

    pub fn dirac_model(&self, flavor: Flavor, valley: Valley) -> Result<EffectiveDiracModel<f64>> {
        let frame = edge_frame(&self.lattice, 1, 0)?;
        EffectiveDiracModel::from_dirac_point(&self.bulk, &frame, flavor, valley, tanh_wall())
    }

    pub fn run(&self, id: u8) -> CriterionResult {
        let t = Instant::now();
        let out = match id {
            1 => self.dirac_point(),
            2 => self.fermi_velocity(),
            3 => self.gauge_relations(),
            4 => self.coupling_symmetries(),
            5 => self.gap_law(),
            6 => self.dirac_closed_forms(),
            7 => self.valley_symmetry(),
            8 => self.correspondence(),
            9 => self.multiscale_residual(),
            10 => self.conjugation_symmetry(),
            11 => self.spectral_flow(),
            12 => self.armchair_pairing(),
            13 => self.no_fold(),
            _ => Ok((vec![check("known criterion", false)], format!("unknown criterion {id}"))),
        };
        let (checks, detail) = out.unwrap_or_else(|e| (vec![check("completed", false)], format!("error: {e}")));
        let name = CRITERIA.iter().find(|c| c.0 == id).map(|c| c.1).unwrap_or("unknown");
        let passed = checks.iter().all(|c| c.passed);
        CriterionResult { id, name, passed, checks, detail, seconds: t.elapsed().as_secs_f64() }
    }

    fn dirac_point(&self) -> Result<Outcome> {
        let t = Instant::now();
        let loc = find_dirac_point(&self.lattice, &self.potential, self.config.bulk_cutoff, &DiracOptions::default())?;
        let secs = t.elapsed().as_secs_f64();
        Ok((
            vec![check("splitting", loc.splitting < 1e-7), check("anisotropy", loc.anisotropy < 0.05), check("runtime", secs < 30.0)],
            format!(
                "E_D = {:.12}, b* = {}, splitting {:.2e}, anisotropy {:.2e}, {:.1} s",
                loc.e_d, loc.b_star, loc.splitting, loc.anisotropy, secs
            ),
        ))
    }

    fn fermi_velocity(&self) -> Result<Outcome> {
        let fit = fit_fermi_velocity(&self.lattice, &self.potential, self.bulk.b_star, self.bulk.cutoff, &[1e-3, 5e-4], 8)?;
        let rel = (fit.v_f - self.bulk.v_f).abs() / self.bulk.v_f;
        Ok((vec![check("relative difference", rel < 1e-2)], format!("v_F fit {:.10}, inner product {:.10}, relative {:.2e}", fit.v_f, self.bulk.v_f, rel)))
    }

    fn gauge_relations(&self) -> Result<Outcome> {
        let mut worst: f64 = 0.0;
        for frame in [(1, 0), (1, 1), (2, 1)] {
            let fr = edge_frame(&self.lattice, frame.0, frame.1)?;
            let k2 = fr.k_e2.norm();
            for valley in [Valley::K, Valley::Kp] {
                let modes = self.bulk.frame_modes(&self.lattice, &fr, valley);
                let v = self.bulk.v_f_valley(valley);
                let m1 = modes.pairing_matrix(&self.lattice, &self.bulk.basis, fr.k_e2);
                let m2 = modes.pairing_matrix(&self.lattice, &self.bulk.basis, fr.ell);
                let e1 = mat2_distance(&m1, &pairing_model(v, &fr, fr.k_e2)) / (self.bulk.v_f * k2);
                let e2 = mat2_distance(&m2, &pairing_model(v, &fr, fr.ell)) / (self.bulk.v_f / k2);
                worst = worst.max(e1).max(e2);
            }
        }
        Ok((vec![check("pairing matrices", worst < 1e-6)], format!("max relative distance {worst:.2e} over frames (1,0), (1,1), (2,1), both valleys")))
    }

    fn coupling_symmetries(&self) -> Result<Outcome> {
        let th = self.bulk.theta.expect("W supplied");
        let tt = self.bulk.theta_tilde.expect("a supplied");
        let r1 = (th[1].value + th[0].value).abs() / th[0].value.abs();
        let r2 = (tt[1].value - tt[0].value).abs() / tt[0].value.abs();
        let off = [th[0], th[1], tt[0], tt[1]].iter().fold(0.0f64, |m, c| m.max(c.offdiag_residual));
        Ok((
            vec![check("theta odd", r1 < 1e-8), check("theta tilde even", r2 < 1e-8), check("sigma_3 structure", off < 1e-7)],
            format!(
                "theta^K = {:.12}, theta^K' = {:.12} (rel {r1:.1e}); theta~^K = {:.12}, theta~^K' = {:.12} (rel {r2:.1e}); off-diagonal {off:.1e}",
                th[0].value, th[1].value, tt[0].value, tt[1].value
            ),
        ))
    }

    /// Half-width of the perturbed bulk gap at the zigzag valley against delta theta, per flavor.
    pub fn gap_deviation(&self, flavor: Flavor, delta: f64) -> Result<f64> {
        let fr = edge_frame(&self.lattice, 1, 0)?;
        let pert = Perturbation { flavor, field: self.field(flavor).clone(), strength: delta };
        let d = &self.edge;
        let (lo, hi) = bulk_gap(&self.lattice, &self.potential, Some(&pert), &fr, fr.kpar_k, d.b_star, d.cutoff, 64)?;
        let theta = d.coupling(flavor, Valley::K).unwrap().abs();
        Ok(((hi - lo) / 2.0 - delta * theta).abs())
    }

    fn gap_law(&self) -> Result<Outcome> {
        let ds = &self.config.deltas;
        let mut parts = Vec::new();
        let mut ok = Vec::new();
        for flavor in [Flavor::PBreaking, Flavor::CBreaking] {
            let dev = ds.iter().map(|&d| self.gap_deviation(flavor, d)).collect::<Result<Vec<_>>>()?;
            let p = fit_order(ds, &dev);
            ok.push(check(if flavor == Flavor::PBreaking { "order P-breaking" } else { "order C-breaking" }, p >= 1.8));
            parts.push(format!("{flavor:?}: deviations {:?}, order {p:.3}", dev.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>()));
        }
        Ok((ok, parts.join("; ")))
    }

    fn dirac_closed_forms(&self) -> Result<Outcome> {
        let t = Instant::now();
        let opts = BoundStateOptions::default();
        let mut zero: f64 = 0.0;
        let mut varj: f64 = 0.0;
        let mut printed: f64 = 0.0;
        let mut stable = true;
        let mut counts = Vec::new();
        for flavor in [Flavor::PBreaking, Flavor::CBreaking] {
            let m = self.dirac_model(flavor, Valley::K)?;
            let g = DiracGrid::for_model(&m);
            let s0 = bound_states(&m, 0.0, &g, &opts)?;
            let n = s0.n_pairs();
            zero = zero.max(s0.zero_branch().map(|b| b.value.abs()).unwrap_or(f64::INFINITY));
            let nw = bound_states(&m, 0.0, &g.widened(), &opts)?.n_pairs();
            let nr = bound_states(&m, 0.0, &g.refined(), &opts)?.n_pairs();
            stable &= n.is_some() && n == nw && n == nr;
            counts.push(format!("{flavor:?} N = {n:?}"));
            let n = n.unwrap_or(0) as i64;
            for mu in [0.2, 0.5, 1.0] {
                let s = bound_states(&m, mu, &g, &opts)?;
                if s.bound_states.len() != s0.bound_states.len() {
                    stable = false;
                    continue;
                }
                let mass = m.mass(mu);
                for j in 1..=n {
                    let z = s0.branch(j).unwrap().value;
                    let want = (z * z + mass * mass).sqrt();
                    varj = varj.max((s.branch(j).unwrap().value - want).abs() / want);
                    varj = varj.max((s.branch(-j).unwrap().value + want).abs() / want);
                }
                let th0 = s.zero_branch().unwrap().value;
                printed = printed.max((th0 - dispersion_zero_branch(&m, mu)).abs());
            }
        }
        let secs = t.elapsed().as_secs_f64();
        Ok((
            vec![
                check("zero mode at mu = 0", zero < 1e-9),
                check("j != 0 closed form", varj < 1e-6),
                check("printed j = 0 formula", printed < 1e-6),
                check("count stable", stable),
                check("runtime", secs < 10.0),
            ],
            format!(
                "|theta_0(0)| {zero:.1e}; j != 0 closed form rel {varj:.1e}; printed j = 0 formula deviation {printed:.3e}{}; {} stable under L and h refinement: {stable}; {secs:.1} s",
                if printed < 1e-6 { "" } else { " (operator gives the opposite sign)" },
                counts.join(", ")
            ),
        ))
    }

    fn valley_symmetry(&self) -> Result<Outcome> {
        let opts = BoundStateOptions::default();
        let mut worst: f64 = 0.0;
        for flavor in [Flavor::PBreaking, Flavor::CBreaking] {
            let mk = self.dirac_model(flavor, Valley::K)?;
            let mkp = self.dirac_model(flavor, Valley::Kp)?;
            let g = DiracGrid::for_model(&mk);
            for mu in [0.0, 0.5, 1.0, -0.7] {
                let r = valley_symmetry_report(&mk, &mkp, mu, &g, &opts, 1e-8)?;
                worst = worst.max(r.max_deviation);
            }
        }
        Ok((vec![check("pairwise deviation", worst < 1e-8)], format!("max pairwise deviation {worst:.2e} over both flavors, mu in {{0, 0.5, 1, -0.7}}")))
    }

    fn correspondence(&self) -> Result<Outcome> {
        let ds = &self.config.deltas;
        let mut ok = Vec::new();
        let mut parts = Vec::new();
        for frame in [(1, 0), (1, 1)] {
            let setup = self.setup(Flavor::PBreaking, frame)?;
            let m = 0.5 * setup.theta_gap()? * setup.frame.k_e2.norm() / setup.dirac.v_f;
            let r = correspondence_check(&setup, ds, &[0.0, m, -m], &self.config.solver)?;
            let zz = frame == (1, 0);
            ok.push(check(if zz { "zigzag counts" } else { "armchair counts" }, r.counts_match));
            ok.push(check(if zz { "zigzag zero-branch order" } else { "armchair zero-branch order" }, r.min_order >= 1.8));
            let found: Vec<usize> = r.counts.iter().map(|c| c.found).collect();
            let orders: Vec<String> = r.orders.iter().map(|o| format!("{}@{:+.3}:{:.2}", o.valley, o.mu, o.order)).collect();
            parts.push(format!(
                "frame {frame:?}: expected {} per point, found {found:?}; zero-branch orders {}",
                r.counts.first().map(|c| c.expected).unwrap_or(0),
                orders.join(" ")
            ));
        }
        Ok((ok, parts.join("; ")))
    }

    fn multiscale_residual(&self) -> Result<Outcome> {
        let setup = self.setup(Flavor::PBreaking, (1, 0))?;
        let mut ok = Vec::new();
        let mut parts = Vec::new();
        for valley in [Valley::K, Valley::Kp] {
            let env = ZeroModeEnvelope::new(setup.model(valley));
            let r = residual_order(&setup, valley, &env, 0.0, 0.0, &self.config.deltas, 0.0)?;
            ok.push(check(if valley == Valley::K { "order K" } else { "order K'" }, r.order >= 1.8));
            parts.push(format!(
                "{valley:?}: residuals {:?}, order {:.3}",
                r.residuals.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>(),
                r.order
            ));
        }
        Ok((ok, parts.join("; ")))
    }

    fn conjugation_symmetry(&self) -> Result<Outcome> {
        let delta = self.config.flow_delta;
        let mut worst: f64 = 0.0;
        let mut count_ok = true;
        let mut n_states = 0;
        for frame in [(1, 0), (1, 1)] {
            let setup = self.setup(Flavor::PBreaking, frame)?;
            let p = setup.problem(delta, EIGEN_WIDTHS);
            let w = 2.0 * delta * setup.theta_gap()?;
            let window = (setup.dirac.e_d - w, setup.dirac.e_d + w);
            let filter = FilterOptions::for_delta(delta, setup.decay_rate());
            for k in [setup.frame.kpar_k + 0.05, 1.0, 0.3] {
                let a = edge_states_at(&p, k, window, None, &filter, &self.config.solver)?;
                let b = edge_states_at(&p, -k, window, None, &filter, &self.config.solver)?;
                if a.states.len() != b.states.len() {
                    count_ok = false;
                    continue;
                }
                n_states += a.states.len();
                for (x, y) in a.states.iter().zip(&b.states) {
                    worst = worst.max((x.energy - y.energy).abs());
                }
            }
        }
        Ok((
            vec![check("counts", count_ok), check("eigenvalues", worst < 1e-7)],
            format!("{n_states} eigenvalues compared at 3 k_par per frame, max |E(k) - E(-k)| {worst:.2e}, counts equal: {count_ok}"),
        ))
    }

    fn spectral_flow(&self) -> Result<Outcome> {
        let mut ok = Vec::new();
        let mut parts = Vec::new();
        let mut c_values = Vec::new();
        for flavor in [Flavor::PBreaking, Flavor::CBreaking] {
            for frame in [(1, 0), (1, 1)] {
                let setup = self.setup(flavor, frame)?;
                let r = spectral_flow_default(&setup, self.config.flow_delta, &self.config.solver)?;
                let name = match (flavor, frame) {
                    (Flavor::PBreaking, (1, 0)) => "P-breaking zigzag is 0",
                    (Flavor::PBreaking, _) => "P-breaking armchair is 0",
                    (_, (1, 0)) => "C-breaking zigzag is +-2",
                    _ => "C-breaking armchair is +-2",
                };
                match flavor {
                    Flavor::PBreaking => ok.push(check(name, r.flow == 0)),
                    Flavor::CBreaking => {
                        ok.push(check(name, r.flow.abs() == 2));
                        c_values.push(r.flow);
                    }
                }
                parts.push(format!("{flavor:?} {frame:?}: {} ({} k_par, {} refinements)", r.flow, r.kpar.len(), r.refinements));
            }
        }
        ok.push(check("C-breaking frames agree", c_values.windows(2).all(|w| w[0] == w[1])));
        Ok((ok, parts.join("; ")))
    }

    fn armchair_pairing(&self) -> Result<Outcome> {
        let setup = self.setup(Flavor::PBreaking, (1, 1))?;
        let ek = ZeroModeEnvelope::new(setup.model(Valley::K));
        let ekp = ZeroModeEnvelope::new(setup.model(Valley::Kp));
        let mut split = Vec::new();
        for &d in &self.config.pair_deltas {
            let p = setup.problem(d, EIGEN_WIDTHS);
            let r = armchair_pair_splitting(&p, &setup.dirac, [&ek, &ekp], 0.0, &setup.filter(d), &self.config.solver)?;
            split.push((d, r.splitting));
        }
        let c = split[0].1 / (split[0].0 * split[0].0);
        let ok = split.iter().all(|&(d, s)| s <= c * d * d * (1.0 + 1e-12));
        Ok((vec![check("splitting below C delta^2", ok)], format!("splittings {:?}, C = {c:.3e}", split.iter().map(|(d, s)| format!("{d}: {s:.3e}")).collect::<Vec<_>>())))
    }

    fn no_fold(&self) -> Result<Outcome> {
        let zz = edge_frame(&self.lattice, 1, 0)?;
        let good = check_no_fold(&self.lattice, &self.potential, &zz, &self.edge, 201, 1e-3)?;
        let weak = default_honeycomb_v(0.5)?;
        // the cone of a weak potential is narrow: probe it closer to K
        let opts = DiracOptions { cone_radii: vec![1e-3, 5e-4], ..DiracOptions::default() };
        let wd = dirac_point_data(&self.lattice, &weak, None, None, self.config.edge_cutoff, &opts)?;
        let ac = edge_frame(&self.lattice, 1, 1)?;
        let bad = check_no_fold(&self.lattice, &weak, &ac, &wd, 201, 1e-3)?;
        Ok((
            vec![check("default zigzag passes", good.passed), check("weak armchair flagged", !bad.passed)],
            format!(
                "V0 = {} zigzag passes: {}; V0 = 0.5 armchair flagged: {} (touches at t = {:?})",
                self.config.v0,
                good.passed,
                !bad.passed,
                bad.offending_t.iter().map(|t| format!("{t:.4}")).collect::<Vec<_>>()
            ),
        ))
    }
}
