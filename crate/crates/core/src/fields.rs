//! Nodal/modal field representation and the pointwise algebra built on it.

use crate::error::{Error, Result};
use crate::spectral_basis::{BasisId, SpectralBasis};

/// A scalar field on one basis' grid.
///
/// Either representation may be stale; `None` marks it as not current.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    basis: BasisId,
    nodal: Option<Vec<f64>>,
    modal: Option<Vec<f64>>,
}

impl Field {
    pub fn from_nodal(basis: &SpectralBasis, values: Vec<f64>) -> Result<Self> {
        check_len("nodal values", basis.node_count(), values.len())?;
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "nodal values",
                step: 0,
            });
        }
        Ok(Field {
            basis: basis.id(),
            nodal: Some(values),
            modal: None,
        })
    }

    pub fn from_modal(basis: &SpectralBasis, coeffs: Vec<f64>) -> Result<Self> {
        check_len("modal coefficients", basis.mode_count(), coeffs.len())?;
        if coeffs.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "modal coefficients",
                step: 0,
            });
        }
        Ok(Field {
            basis: basis.id(),
            nodal: None,
            modal: Some(coeffs),
        })
    }

    /// Both representations, trusted to agree.
    pub(crate) fn from_parts(basis: &SpectralBasis, nodal: Vec<f64>, modal: Vec<f64>) -> Self {
        debug_assert_eq!(nodal.len(), basis.node_count());
        debug_assert_eq!(modal.len(), basis.mode_count());
        Field {
            basis: basis.id(),
            nodal: Some(nodal),
            modal: Some(modal),
        }
    }

    pub fn constant(basis: &SpectralBasis, c: f64) -> Self {
        let mut modal = vec![0.0; basis.mode_count()];
        modal[0] = c * basis.measure().sqrt();
        Field::from_parts(basis, vec![c; basis.node_count()], modal)
    }

    pub fn eigenfunction(basis: &SpectralBasis, k: usize) -> Result<Self> {
        let nodal = basis.nodal_eigenfunction(k)?;
        let mut modal = vec![0.0; basis.mode_count()];
        modal[k] = 1.0;
        Ok(Field::from_parts(basis, nodal, modal))
    }

    pub fn basis_id(&self) -> BasisId {
        self.basis
    }

    pub fn nodal(&self) -> Option<&[f64]> {
        self.nodal.as_deref()
    }

    pub fn modal(&self) -> Option<&[f64]> {
        self.modal.as_deref()
    }

    pub fn is_nodal_current(&self) -> bool {
        self.nodal.is_some()
    }

    pub fn is_modal_current(&self) -> bool {
        self.modal.is_some()
    }

    pub fn nodal_values(&self) -> Result<&[f64]> {
        self.nodal().ok_or(Error::StaleRepresentation("nodal"))
    }

    pub fn modal_values(&self) -> Result<&[f64]> {
        self.modal().ok_or(Error::StaleRepresentation("modal"))
    }

    /// Mutable nodal access; the modal representation becomes stale.
    pub fn nodal_mut(&mut self) -> Result<&mut Vec<f64>> {
        self.modal = None;
        self.nodal
            .as_mut()
            .ok_or(Error::StaleRepresentation("nodal"))
    }

    pub fn check_basis(&self, basis: &SpectralBasis) -> Result<()> {
        if self.basis == basis.id() {
            Ok(())
        } else {
            Err(Error::BasisMismatch {
                expected: basis.id().0,
                found: self.basis.0,
            })
        }
    }

    /// Field with a current modal representation (Galerkin projection when
    /// only nodal values are current).
    pub fn to_modal(&self, basis: &SpectralBasis) -> Result<Field> {
        self.check_basis(basis)?;
        if self.modal.is_some() {
            return Ok(self.clone());
        }
        let nodal = self.nodal_values()?;
        let mut modal = vec![0.0; basis.mode_count()];
        basis.project(nodal, &mut modal);
        Ok(Field::from_parts(basis, nodal.to_vec(), modal))
    }

    /// Field with a current nodal representation.
    pub fn to_nodal(&self, basis: &SpectralBasis) -> Result<Field> {
        self.check_basis(basis)?;
        if self.nodal.is_some() {
            return Ok(self.clone());
        }
        let modal = self.modal_values()?;
        let mut nodal = vec![0.0; basis.node_count()];
        basis.synthesize(modal, &mut nodal);
        Ok(Field::from_parts(basis, nodal, modal.to_vec()))
    }

    /// Both representations current; the modal one is authoritative when
    /// both were already present.
    pub fn complete(&self, basis: &SpectralBasis) -> Result<Field> {
        if self.modal.is_some() {
            self.to_nodal(basis)
        } else {
            self.to_modal(basis)
        }
    }

    pub fn min_nodal(&self) -> Result<(usize, f64)> {
        Ok(argmin(self.nodal_values()?))
    }
}

/// Activator/inhibitor pair on a common basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub u: Field,
    pub v: Field,
}

impl FieldPair {
    pub fn new(u: Field, v: Field) -> Result<Self> {
        if u.basis_id() != v.basis_id() {
            return Err(Error::BasisMismatch {
                expected: u.basis_id().0,
                found: v.basis_id().0,
            });
        }
        Ok(FieldPair { u, v })
    }

    /// `u >= 0` and `v > 0` on every node.
    pub fn check_admissible(&self) -> Result<()> {
        let (iu, mu) = self.u.min_nodal()?;
        if mu < 0.0 {
            return Err(Error::Precondition(format!(
                "activator is negative at node {iu} (u = {mu:e})"
            )));
        }
        let (iv, mv) = self.v.min_nodal()?;
        if mv <= 0.0 {
            return Err(Error::NonPositiveInhibitor { node: iv, value: mv });
        }
        Ok(())
    }
}

/// Quadrature approximation of `(int |f|^p dx)^(1/p)`.
pub fn norm_lp(basis: &SpectralBasis, f: &Field, p: f64) -> Result<f64> {
    f.check_basis(basis)?;
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("L^p norm needs p >= 1, got {p}")));
    }
    let f = f.to_nodal(basis)?;
    Ok(lp_norm_nodal(basis, f.nodal_values()?, p))
}

pub(crate) fn lp_norm_nodal(basis: &SpectralBasis, nodal: &[f64], p: f64) -> f64 {
    lp_pow_nodal(basis, nodal, p).powf(1.0 / p)
}

/// `int |f|^p dx`
pub(crate) fn lp_pow_nodal(basis: &SpectralBasis, nodal: &[f64], p: f64) -> f64 {
    let s: f64 = if p == 2.0 {
        nodal.iter().map(|x| x * x).sum()
    } else if p == 1.0 {
        nodal.iter().map(|x| x.abs()).sum()
    } else {
        nodal.iter().map(|x| x.abs().powf(p)).sum()
    };
    basis.node_weight() * s
}

/// Truncated multiplier norm `(sum (1 + lambda_k)^s |f_k|^2)^(1/2)`.
pub fn norm_hs(basis: &SpectralBasis, f: &Field, s: f64) -> Result<f64> {
    f.check_basis(basis)?;
    let f = f.to_modal(basis)?;
    Ok(hs_norm_sq_modal(basis, f.modal_values()?, s).sqrt())
}

pub(crate) fn hs_norm_sq_modal(basis: &SpectralBasis, modal: &[f64], s: f64) -> f64 {
    if s == 0.0 {
        return modal.iter().map(|c| c * c).sum();
    }
    modal
        .iter()
        .zip(basis.eigenvalues())
        .map(|(c, &l)| (1.0 + l).powf(s) * c * c)
        .sum()
}

/// Nodal `u^2 / max(v, v_floor)` and the number of nodes where the floor
/// was active.
pub fn reaction_quotient(
    basis: &SpectralBasis,
    u: &Field,
    v: &Field,
    v_floor: f64,
) -> Result<(Field, usize)> {
    u.check_basis(basis)?;
    v.check_basis(basis)?;
    let u = u.to_nodal(basis)?;
    let mut out = vec![0.0; basis.node_count()];
    let floors = quotient_nodal(u.nodal_values()?, v.nodal_values()?, v_floor, &mut out)?;
    Ok((Field::from_nodal(basis, out)?, floors))
}

pub(crate) fn quotient_nodal(u: &[f64], v: &[f64], v_floor: f64, out: &mut [f64]) -> Result<usize> {
    let mut floors = 0;
    for (i, ((o, &ui), &vi)) in out.iter_mut().zip(u).zip(v).enumerate() {
        let denom = floored(vi, v_floor, i)?;
        if denom != vi {
            floors += 1;
        }
        *o = ui * ui / denom;
    }
    Ok(floors)
}

/// `max(v, floor)`, rejecting nonpositive `v` when the floor is zero.
#[inline]
pub(crate) fn floored(v: f64, floor: f64, node: usize) -> Result<f64> {
    if v <= 0.0 && floor <= 0.0 {
        Err(Error::NonPositiveInhibitor { node, value: v })
    } else if v < floor {
        Ok(floor)
    } else {
        Ok(v)
    }
}

/// `int weight |grad f|^2 dx` by spectral differentiation of `f`.
pub fn gradient_sq_integral(basis: &SpectralBasis, f: &Field, weight: &Field) -> Result<f64> {
    f.check_basis(basis)?;
    weight.check_basis(basis)?;
    let f = f.to_modal(basis)?;
    let g = grad_sq_nodal(basis, f.modal_values()?);
    let w = weight.nodal_values()?;
    Ok(basis.node_weight() * g.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
}

/// Nodal `|grad f|^2`.
pub(crate) fn grad_sq_nodal(basis: &SpectralBasis, modal: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; basis.node_count()];
    let mut buf = vec![0.0; basis.node_count()];
    for axis in 0..basis.dim() {
        basis.gradient(modal, axis, &mut buf);
        for (a, g) in acc.iter_mut().zip(&buf) {
            *a += g * g;
        }
    }
    acc
}

pub(crate) fn argmin(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) })
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            what,
            expected,
            found,
        })
    }
}
