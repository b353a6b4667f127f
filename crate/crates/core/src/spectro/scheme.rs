use crate::error::{Error, Result};

/// Which ground hyperfine state plays which role in the storage protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundRoles {
    /// State holding the comb population (input transition).
    pub afc: usize,
    /// Empty state receiving the spin wave.
    pub storage: usize,
    /// Shelving state used during preparation.
    pub auxiliary: usize,
}

impl Default for GroundRoles {
    fn default() -> Self {
        GroundRoles {
            afc: 0,
            storage: 1,
            auxiliary: 2,
        }
    }
}

impl GroundRoles {
    pub fn is_permutation(&self) -> bool {
        let mut seen = [false; 3];
        for r in [self.afc, self.storage, self.auxiliary] {
            if r > 2 || seen[r] {
                return false;
            }
            seen[r] = true;
        }
        true
    }
}

/// Hyperfine structure and coherence properties of the ion species.
///
/// Ground states are indexed from the lowest (±1/2g) upward, excited states
/// likewise (±1/2e, ±3/2e, ±5/2e).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelScheme {
    /// Gaps 1/2g–3/2g and 3/2g–5/2g in MHz.
    pub ground_splittings_mhz: [f64; 2],
    /// Gaps 1/2e–3/2e and 3/2e–5/2e in MHz.
    pub excited_splittings_mhz: [f64; 2],
    pub inhom_fwhm_ghz: f64,
    pub t2_opt_us: f64,
    pub t1_opt_us: f64,
    pub gamma_inh_spin_khz: f64,
    pub roles: GroundRoles,
}

impl Default for LevelScheme {
    fn default() -> Self {
        LevelScheme {
            ground_splittings_mhz: [10.2, 17.3],
            excited_splittings_mhz: [4.6, 4.8],
            inhom_fwhm_ghz: 20.0,
            t2_opt_us: 49.9,
            t1_opt_us: 164.0,
            gamma_inh_spin_khz: 23.6,
            roles: GroundRoles::default(),
        }
    }
}

impl LevelScheme {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ground_splittings_mhz", self.ground_splittings_mhz[0]),
            ("ground_splittings_mhz", self.ground_splittings_mhz[1]),
            ("excited_splittings_mhz", self.excited_splittings_mhz[0]),
            ("excited_splittings_mhz", self.excited_splittings_mhz[1]),
            ("inhom_fwhm_ghz", self.inhom_fwhm_ghz),
            ("t2_opt_us", self.t2_opt_us),
            ("t1_opt_us", self.t1_opt_us),
            ("gamma_inh_spin_khz", self.gamma_inh_spin_khz),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !self.roles.is_permutation() {
            return Err(Error::invalid(
                "roles",
                format!("{:?} is not a permutation of the ground states", self.roles),
            ));
        }
        Ok(())
    }

    /// Ground level energies in MHz, lowest at zero.
    pub fn ground_levels(&self) -> [f64; 3] {
        let [a, b] = self.ground_splittings_mhz;
        [0.0, a, a + b]
    }

    /// Excited level energies in MHz, lowest at zero.
    pub fn excited_levels(&self) -> [f64; 3] {
        let [a, b] = self.excited_splittings_mhz;
        [0.0, a, a + b]
    }

    /// Frequency of the reference transition 1/2g→3/2e above the zero-phonon
    /// line origin, in MHz.
    pub fn reference_frequency(&self) -> f64 {
        let e = self.excited_levels();
        let g = self.ground_levels();
        e[REFERENCE_CLASS.excited] - g[REFERENCE_CLASS.ground]
    }
}

/// An ion class: the ions whose `ground → excited` transition is resonant
/// with a given frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IonClass {
    pub ground: usize,
    pub excited: usize,
}

impl IonClass {
    pub const fn index(self) -> usize {
        self.ground * 3 + self.excited
    }

    pub const fn from_index(i: usize) -> Self {
        IonClass {
            ground: i / 3,
            excited: i % 3,
        }
    }

    pub fn all() -> impl Iterator<Item = IonClass> {
        (0..9).map(IonClass::from_index)
    }
}

/// The 1/2g→3/2e transition that defines zero offset.
pub const REFERENCE_CLASS: IonClass = IonClass {
    ground: 0,
    excited: 1,
};

/// Transition frequencies `excited[j] - ground[i] - reference` for every pair,
/// indexed `[i][j]`.
pub fn transition_table(ground: [f64; 3], excited: [f64; 3], reference: f64) -> [[f64; 3]; 3] {
    let mut t = [[0.0; 3]; 3];
    for (i, row) in t.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = excited[j] - ground[i] - reference;
        }
    }
    t
}

/// Offsets of the nine g_i→e_j transitions from the reference transition,
/// indexed by [`IonClass::index`].
pub fn class_offsets(scheme: &LevelScheme) -> [f64; 9] {
    let t = transition_table(
        scheme.ground_levels(),
        scheme.excited_levels(),
        scheme.reference_frequency(),
    );
    let mut out = [0.0; 9];
    for c in IonClass::all() {
        out[c.index()] = t[c.ground][c.excited];
    }
    out
}
