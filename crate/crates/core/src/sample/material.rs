//! Sellmeier dispersion models loaded from the bundled materials table.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../../data/materials.json");

/// `n^2 = 1 + sum_k b_k lambda^2 / (lambda^2 - c_k^2)`, lambda in micrometres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub b: Vec<f64>,
    pub c_um: Vec<f64>,
    pub min_um: f64,
    pub max_um: f64,
}

fn bundled() -> &'static BTreeMap<String, Material> {
    static TABLE: OnceLock<BTreeMap<String, Material>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table: BTreeMap<String, Material> =
            serde_json::from_str(BUNDLED).expect("bundled materials table is valid JSON");
        for (name, m) in table.iter_mut() {
            m.name = name.clone();
        }
        table
    })
}

impl Material {
    /// Looks a material up in the bundled table.
    pub fn named(name: &str) -> Result<Self> {
        bundled()
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }

    pub fn silicon() -> Self {
        Self::named("silicon").expect("silicon is bundled")
    }

    pub fn available() -> Vec<String> {
        bundled().keys().cloned().collect()
    }

    /// Parses a user-supplied table with the same layout as the bundled one.
    pub fn table_from_json(text: &str) -> Result<BTreeMap<String, Material>> {
        let mut table: BTreeMap<String, Material> = serde_json::from_str(text)?;
        for (name, m) in table.iter_mut() {
            m.name = name.clone();
            if m.b.len() != m.c_um.len() || m.b.is_empty() {
                return Err(Error::invalid("materials", format!("`{name}`: b and c_um lengths differ")));
            }
            if !(m.min_um > 0.0 && m.max_um > m.min_um) {
                return Err(Error::invalid("materials", format!("`{name}`: empty validity window")));
            }
        }
        Ok(table)
    }

    fn wavelength_um(&self, omega: f64) -> Result<f64> {
        if !(omega > 0.0) {
            return Err(Error::NonPositiveFrequency(omega));
        }
        let lambda = crate::units::omega_to_wavelength(omega) * 1e6;
        if lambda < self.min_um || lambda > self.max_um {
            return Err(Error::OutsideValidityWindow {
                material: self.name.clone(),
                wavelength_um: lambda,
                min_um: self.min_um,
                max_um: self.max_um,
            });
        }
        Ok(lambda)
    }

    fn n_squared(&self, l: f64) -> f64 {
        let l2 = l * l;
        1.0 + self
            .b
            .iter()
            .zip(&self.c_um)
            .map(|(b, c)| b * l2 / (l2 - c * c))
            .sum::<f64>()
    }

    /// Refractive index at angular frequency `omega` (rad/s).
    pub fn index(&self, omega: f64) -> Result<f64> {
        let l = self.wavelength_um(omega)?;
        Ok(self.n_squared(l).sqrt())
    }

    /// `dn/d omega` (s), from the analytic derivative of the Sellmeier form.
    pub fn dn_domega(&self, omega: f64) -> Result<f64> {
        let l = self.wavelength_um(omega)?;
        let n = self.n_squared(l).sqrt();
        let l2 = l * l;
        let dn2_dl: f64 = self
            .b
            .iter()
            .zip(&self.c_um)
            .map(|(b, c)| {
                let c2 = c * c;
                -2.0 * l * b * c2 / ((l2 - c2) * (l2 - c2))
            })
            .sum();
        let dn_dl = dn2_dl / (2.0 * n);
        // d lambda / d omega = -lambda / omega
        Ok(-dn_dl * l / omega)
    }
}

/// Sellmeier index of a named bundled material.
pub fn sellmeier_index(material: &str, omega: f64) -> Result<f64> {
    Material::named(material)?.index(omega)
}

/// Sellmeier `dn/d omega` of a named bundled material.
pub fn sellmeier_dn_domega(material: &str, omega: f64) -> Result<f64> {
    Material::named(material)?.dn_domega(omega)
}
