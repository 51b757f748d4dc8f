//! Spin chains, observables, bath discretisation and joint Hamiltonians.
//!
//! Basis conventions: σ_z = diag(1, -1), so bit 0 of a site is spin up
//! (n_z = +1). Site 0 is the most significant tensor factor. Joint spaces
//! are ordered chain sites first, then the modes of site 0, site 1, and so on.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use crate::bath::SpectralDensity;
use crate::linalg::CMatrix;
use crate::quadrature::gauss_legendre;
use crate::quantum::{dimension_forecast, thermal_populations, FockSpace, Operator, State, DEFAULT_DIMENSION_CAP};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl core::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(Error::InvalidParameter(format!("unknown axis {other:?}"))),
        }
    }
}

/// Hamiltonian family of a chain with open boundaries.
#[derive(Clone, Debug, PartialEq)]
pub enum ChainFamily {
    /// Σ J_k σ_z,k σ_z,k+1 + Σ h_k σ_z,k
    IsingZz { couplings: Vec<f64>, fields: Vec<f64> },
    /// The Ising terms plus Σ g_k σ_x,k.
    TransverseIsing { couplings: Vec<f64>, fields: Vec<f64>, transverse: Vec<f64> },
    /// Σ J_k (σ_x σ_x + σ_y σ_y + Δ σ_z σ_z)_{k,k+1} + Σ h_k σ_z,k
    Xxz { couplings: Vec<f64>, anisotropy: f64, fields: Vec<f64> },
    /// Arbitrary real diagonal in the computational basis.
    CustomDiagonal { energies: Vec<f64> },
}

impl ChainFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ChainFamily::IsingZz { .. } => "ising_zz",
            ChainFamily::TransverseIsing { .. } => "transverse_ising",
            ChainFamily::Xxz { .. } => "xxz",
            ChainFamily::CustomDiagonal { .. } => "custom_diagonal",
        }
    }

    /// Families whose Hamiltonian is diagonal in the σ_z product basis.
    pub fn is_sigma_z_diagonal(&self) -> bool {
        matches!(self, ChainFamily::IsingZz { .. } | ChainFamily::CustomDiagonal { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinChainSpec {
    pub sites: usize,
    pub family: ChainFamily,
}

impl SpinChainSpec {
    pub fn new(sites: usize, family: ChainFamily) -> Result<Self> {
        let spec = Self { sites, family };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sites;
        if n == 0 {
            return Err(Error::InvalidParameter("chain needs at least one site".into()));
        }
        let bonds = n - 1;
        let check = |name: &str, v: &[f64], want: usize| -> Result<()> {
            if v.len() != want {
                return Err(Error::InvalidParameter(format!(
                    "{name} has {} entries, expected {want} for {n} sites",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} has non-finite entries")));
            }
            Ok(())
        };
        match &self.family {
            ChainFamily::IsingZz { couplings, fields } => {
                check("couplings", couplings, bonds)?;
                check("fields", fields, n)
            }
            ChainFamily::TransverseIsing { couplings, fields, transverse } => {
                check("couplings", couplings, bonds)?;
                check("fields", fields, n)?;
                check("transverse", transverse, n)
            }
            ChainFamily::Xxz { couplings, anisotropy, fields } => {
                check("couplings", couplings, bonds)?;
                check("fields", fields, n)?;
                check("anisotropy", &[*anisotropy], 1)
            }
            ChainFamily::CustomDiagonal { energies } => {
                let d = dimension_forecast(core::iter::repeat_n(2, n));
                if energies.len() as u128 != d {
                    return Err(Error::InvalidParameter(format!(
                        "energies has {} entries, expected 2^{n} = {d}",
                        energies.len()
                    )));
                }
                check("energies", energies, energies.len())
            }
        }
    }

    pub fn dimension(&self) -> u128 {
        dimension_forecast(core::iter::repeat_n(2, self.sites))
    }
}

/// σ_z eigenvalue (+1 or -1) of `site` in basis state `index` of an `n`-site chain.
pub fn site_spin(index: usize, site: usize, n: usize) -> f64 {
    if (index >> (n - 1 - site)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// A Pauli string maps |b⟩ to `phase`·|b XOR flip⟩.
#[derive(Clone, Copy, Debug)]
struct PauliAction {
    flip: usize,
    z_mask: usize,
    y_count: u32,
}

impl PauliAction {
    fn new(n: usize, factors: &[(usize, Axis)]) -> Self {
        let mut flip = 0;
        let mut z_mask = 0;
        let mut y_count = 0;
        for &(site, axis) in factors {
            let bit = 1usize << (n - 1 - site);
            match axis {
                Axis::X => flip |= bit,
                Axis::Y => {
                    flip |= bit;
                    z_mask |= bit;
                    y_count += 1;
                }
                Axis::Z => z_mask |= bit,
            }
        }
        Self { flip, z_mask, y_count }
    }

    /// (target index, amplitude) for input basis state `b`.
    fn apply(&self, b: usize) -> (usize, Complex64) {
        // σ_y = i σ_x σ_z: the z part acts first and contributes (-1)^bit.
        let sign = if (b & self.z_mask).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        let phase = match self.y_count % 4 {
            0 => Complex64::new(sign, 0.0),
            1 => Complex64::new(0.0, sign),
            2 => Complex64::new(-sign, 0.0),
            _ => Complex64::new(0.0, -sign),
        };
        (b ^ self.flip, phase)
    }
}

fn chain_cap_check(n: usize) -> Result<usize> {
    let d = dimension_forecast(core::iter::repeat_n(2, n));
    if d > DEFAULT_DIMENSION_CAP as u128 {
        return Err(Error::DimensionCap { requested: d, cap: DEFAULT_DIMENSION_CAP });
    }
    Ok(d as usize)
}

fn add_pauli_term(m: &mut CMatrix, n: usize, coefficient: f64, factors: &[(usize, Axis)]) {
    if coefficient == 0.0 {
        return;
    }
    let action = PauliAction::new(n, factors);
    for b in 0..m.ncols() {
        let (row, amp) = action.apply(b);
        m[(row, b)] += amp * coefficient;
    }
}

pub fn build_chain_hamiltonian(spec: &SpinChainSpec) -> Result<Operator> {
    spec.validate()?;
    let n = spec.sites;
    let d = chain_cap_check(n)?;
    let mut m = CMatrix::zeros(d, d);
    let ising = |m: &mut CMatrix, couplings: &[f64], fields: &[f64]| {
        for (k, &j) in couplings.iter().enumerate() {
            add_pauli_term(m, n, j, &[(k, Axis::Z), (k + 1, Axis::Z)]);
        }
        for (k, &h) in fields.iter().enumerate() {
            add_pauli_term(m, n, h, &[(k, Axis::Z)]);
        }
    };
    match &spec.family {
        ChainFamily::IsingZz { couplings, fields } => ising(&mut m, couplings, fields),
        ChainFamily::TransverseIsing { couplings, fields, transverse } => {
            ising(&mut m, couplings, fields);
            for (k, &g) in transverse.iter().enumerate() {
                add_pauli_term(&mut m, n, g, &[(k, Axis::X)]);
            }
        }
        ChainFamily::Xxz { couplings, anisotropy, fields } => {
            for (k, &j) in couplings.iter().enumerate() {
                add_pauli_term(&mut m, n, j, &[(k, Axis::X), (k + 1, Axis::X)]);
                add_pauli_term(&mut m, n, j, &[(k, Axis::Y), (k + 1, Axis::Y)]);
                add_pauli_term(&mut m, n, j * anisotropy, &[(k, Axis::Z), (k + 1, Axis::Z)]);
            }
            for (k, &h) in fields.iter().enumerate() {
                add_pauli_term(&mut m, n, h, &[(k, Axis::Z)]);
            }
        }
        ChainFamily::CustomDiagonal { energies } => {
            for (i, &e) in energies.iter().enumerate() {
                m[(i, i)] = Complex64::new(e, 0.0);
            }
        }
    }
    Ok(Operator::from_parts(m, vec![2; n]))
}

/// Product of Paulis at distinct sites; empty means the identity.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ObservableSpec {
    pub factors: Vec<(usize, Axis)>,
}

impl ObservableSpec {
    pub fn new(factors: Vec<(usize, Axis)>) -> Self {
        Self { factors }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn single(site: usize, axis: Axis) -> Self {
        Self { factors: vec![(site, axis)] }
    }

    pub fn validate(&self, sites: usize) -> Result<()> {
        for (i, &(site, _)) in self.factors.iter().enumerate() {
            if site >= sites {
                return Err(Error::InvalidParameter(format!(
                    "observable site {site} out of range for {sites} sites"
                )));
            }
            if self.factors[..i].iter().any(|&(s, _)| s == site) {
                return Err(Error::InvalidParameter(format!("observable lists site {site} twice")));
            }
        }
        Ok(())
    }

    /// Pauli axis at `site`, `None` for identity.
    pub fn axis_at(&self, site: usize) -> Option<Axis> {
        self.factors.iter().find(|&&(s, _)| s == site).map(|&(_, a)| a)
    }
}

pub fn local_operator(sites: usize, obs: &ObservableSpec) -> Result<Operator> {
    obs.validate(sites)?;
    let d = chain_cap_check(sites)?;
    let mut m = CMatrix::zeros(d, d);
    add_pauli_term(&mut m, sites, 1.0, &obs.factors);
    Ok(Operator::from_parts(m, vec![2; sites]))
}

/// One bosonic mode: frequency ω_j > 0 and real coupling amplitude C_j.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathMode {
    pub omega: f64,
    pub coupling: f64,
}

impl BathMode {
    pub fn new(omega: f64, coupling: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidParameter(format!("mode frequency must be > 0, got {omega}")));
        }
        if !coupling.is_finite() {
            return Err(Error::InvalidParameter("mode coupling must be finite".into()));
        }
        Ok(Self { omega, coupling })
    }
}

/// Gauss–Legendre discretisation of J on (0, ω_max]: C_j² = J(ω_j)·w_j.
pub fn discretize_bath(spectral: &SpectralDensity, modes: usize, omega_max: f64) -> Result<Vec<BathMode>> {
    if modes == 0 {
        return Err(Error::InvalidParameter("need at least one bath mode".into()));
    }
    if !(omega_max.is_finite() && omega_max > 0.0) {
        return Err(Error::InvalidParameter(format!("omega_max must be > 0, got {omega_max}")));
    }
    let (x, w) = gauss_legendre(modes);
    let half = 0.5 * omega_max;
    Ok(x.iter()
        .zip(&w)
        .map(|(&x, &w)| {
            let omega = (x + 1.0) * half;
            BathMode { omega, coupling: (spectral.value(omega) * w * half).sqrt() }
        })
        .collect())
}

/// Default discretisation ceiling, in units of the cutoff.
pub const DEFAULT_OMEGA_MAX: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub enum BathModes {
    /// `per_site` Gauss–Legendre modes of the spectral density on (0, omega_max].
    Discretized { per_site: usize, omega_max: f64 },
    /// The same explicit modes for every site.
    Explicit(Vec<BathMode>),
}

/// Independent bosonic bath on every site with linear σ_z coupling.
#[derive(Clone, Debug, PartialEq)]
pub struct BathSpec {
    pub spectral: SpectralDensity,
    /// Uniform coupling λ.
    pub coupling: f64,
    /// Optional per-site λ_k overriding `coupling`.
    pub site_couplings: Option<Vec<f64>>,
    pub beta: f64,
    pub modes: BathModes,
    pub n_max: usize,
}

impl BathSpec {
    pub fn validate(&self, sites: usize) -> Result<()> {
        if !(self.coupling.is_finite() && self.coupling >= 0.0) {
            return Err(Error::InvalidParameter(format!("coupling must be >= 0, got {}", self.coupling)));
        }
        if let Some(ls) = &self.site_couplings {
            if ls.len() != sites {
                return Err(Error::InvalidParameter(format!(
                    "site_couplings has {} entries, expected {sites}",
                    ls.len()
                )));
            }
            if ls.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                return Err(Error::InvalidParameter("site couplings must be >= 0".into()));
            }
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {}", self.beta)));
        }
        if self.n_max < 2 {
            return Err(Error::InvalidParameter(format!("n_max must be >= 2, got {}", self.n_max)));
        }
        match &self.modes {
            BathModes::Discretized { per_site, omega_max } => {
                if *per_site == 0 {
                    return Err(Error::InvalidParameter("modes_per_site must be >= 1".into()));
                }
                if !(omega_max.is_finite() && *omega_max > 0.0) {
                    return Err(Error::InvalidParameter("omega_max must be > 0".into()));
                }
            }
            BathModes::Explicit(modes) => {
                if modes.is_empty() {
                    return Err(Error::InvalidParameter("explicit bath has no modes".into()));
                }
                for m in modes {
                    BathMode::new(m.omega, m.coupling)?;
                }
            }
        }
        Ok(())
    }

    pub fn site_modes(&self) -> Result<Vec<BathMode>> {
        match &self.modes {
            BathModes::Discretized { per_site, omega_max } => discretize_bath(&self.spectral, *per_site, *omega_max),
            BathModes::Explicit(modes) => Ok(modes.clone()),
        }
    }

    pub fn modes_per_site(&self) -> usize {
        match &self.modes {
            BathModes::Discretized { per_site, .. } => *per_site,
            BathModes::Explicit(modes) => modes.len(),
        }
    }

    pub fn site_coupling(&self, site: usize) -> f64 {
        match &self.site_couplings {
            Some(ls) => ls[site],
            None => self.coupling,
        }
    }

    /// Same bath with a different Fock cutoff.
    pub fn with_n_max(&self, n_max: usize) -> Self {
        Self { n_max, ..self.clone() }
    }

    /// Subsystem dimensions of the joint space for `sites` chain sites.
    pub fn joint_dims(&self, sites: usize) -> Vec<usize> {
        let mut dims = vec![2; sites];
        dims.extend(core::iter::repeat_n(self.n_max, sites * self.modes_per_site()));
        dims
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// H_S + H_E + H_{S:E}
    Forward,
    /// -H_S + H_E + H_{S:E}, the generator of the system-only reversal.
    SystemReversed,
}

/// H_S ⊗ I ± … assembled directly on the joint basis.
pub fn assemble_joint(chain: &Operator, bath: &BathSpec, variant: Variant) -> Result<Operator> {
    assemble_joint_capped(chain, bath, variant, DEFAULT_DIMENSION_CAP)
}

pub fn assemble_joint_capped(chain: &Operator, bath: &BathSpec, variant: Variant, cap: usize) -> Result<Operator> {
    let sites = chain.dims().len();
    if chain.dims().iter().any(|&d| d != 2) {
        return Err(Error::DimensionMismatch(format!(
            "chain operator must act on spin-1/2 sites, got dims {:?}",
            chain.dims()
        )));
    }
    bath.validate(sites)?;
    let dims = bath.joint_dims(sites);
    let requested = dimension_forecast(dims.iter().copied());
    if requested > cap as u128 {
        return Err(Error::DimensionCap { requested, cap });
    }
    let modes = bath.site_modes()?;
    let per_site = modes.len();
    let n_max = bath.n_max;
    let ds = chain.dim();
    let n_modes = sites * per_site;
    let de: usize = dims[sites..].iter().product();
    let d = ds * de;

    let mut strides = vec![1usize; n_modes];
    for m in (0..n_modes.saturating_sub(1)).rev() {
        strides[m] = strides[m + 1] * n_max;
    }
    let digit = |e: usize, m: usize| (e / strides[m]) % n_max;

    let mut h = CMatrix::zeros(d, d);
    let sign = match variant {
        Variant::Forward => 1.0,
        Variant::SystemReversed => -1.0,
    };
    let hs = chain.matrix();
    for b in 0..ds {
        for a in 0..ds {
            let v = hs[(a, b)] * sign;
            if v != Complex64::new(0.0, 0.0) {
                for e in 0..de {
                    h[(a * de + e, b * de + e)] += v;
                }
            }
        }
    }
    let sqrt_n: Vec<f64> = (0..n_max).map(|k| (k as f64).sqrt()).collect();
    for s in 0..ds {
        for e in 0..de {
            let i = s * de + e;
            let mut energy = 0.0;
            for m in 0..n_modes {
                let site = m / per_site;
                let mode = modes[m % per_site];
                let k = digit(e, m);
                energy += mode.omega * k as f64;
                // λ_k C_j σ_z,k (a + a†): raise the Fock digit of mode m
                if k + 1 < n_max {
                    let g = bath.site_coupling(site) * mode.coupling * site_spin(s, site, sites) * sqrt_n[k + 1];
                    let j = i + strides[m];
                    h[(j, i)] += Complex64::new(g, 0.0);
                    h[(i, j)] += Complex64::new(g, 0.0);
                }
            }
            h[(i, i)] += Complex64::new(energy, 0.0);
        }
    }
    Ok(Operator::from_parts(h, dims))
}

/// ρ_E: product of per-mode truncated thermal states, joint mode ordering.
pub fn environment_state(bath: &BathSpec, sites: usize) -> Result<State> {
    bath.validate(sites)?;
    let modes = bath.site_modes()?;
    let dims: Vec<usize> = bath.joint_dims(sites)[sites..].to_vec();
    let de = dimension_forecast(dims.iter().copied());
    if de > DEFAULT_DIMENSION_CAP as u128 {
        return Err(Error::DimensionCap { requested: de, cap: DEFAULT_DIMENSION_CAP });
    }
    let mut pops = vec![1.0f64];
    for m in 0..sites * modes.len() {
        let mode = FockSpace::new(bath.n_max, modes[m % modes.len()].omega)?;
        let p = thermal_populations(&mode, bath.beta)?;
        pops = pops.iter().flat_map(|&a| p.iter().map(move |&b| a * b)).collect();
    }
    let op = Operator::from_real_diagonal(&pops, dims)?;
    State::new(op)
}

/// Lifts a chain operator to the joint space as A ⊗ I_E.
pub fn lift_to_joint(op: &Operator, joint_dims: &[usize]) -> Result<Operator> {
    let sites = op.dims().len();
    if joint_dims.len() < sites || joint_dims[..sites] != *op.dims() {
        return Err(Error::DimensionMismatch(format!(
            "operator dims {:?} are not a prefix of joint dims {joint_dims:?}",
            op.dims()
        )));
    }
    let de: usize = joint_dims[sites..].iter().product();
    let ds = op.dim();
    let mut m = CMatrix::zeros(ds * de, ds * de);
    let src = op.matrix();
    for b in 0..ds {
        for a in 0..ds {
            let v = src[(a, b)];
            if v != Complex64::new(0.0, 0.0) {
                for e in 0..de {
                    m[(a * de + e, b * de + e)] = v;
                }
            }
        }
    }
    Ok(Operator::from_parts(m, joint_dims.to_vec()))
}
