//! Closed-form thermodynamics of an isolated Hubbard site.

/// Filling per spin and `g² = ⟨n↑n↓⟩ / ⟨n↑⟩²` of one site at inverse
/// temperature `tau`, from `Z = 1 + 2e^{τμ} + e^{-τ(U - 2μ)}`.
pub fn single_site_analytic(u: f64, mu: f64, tau: f64) -> (f64, f64) {
    let single = tau * mu;
    let double = -tau * (u - 2.0 * mu);
    let shift = 0.0f64.max(single).max(double);
    let (e0, e1, e2) = ((-shift).exp(), (single - shift).exp(), (double - shift).exp());
    let z = e0 + 2.0 * e1 + e2;
    let filling = (e1 + e2) / z;
    let both = e2 / z;
    (filling, both / (filling * filling))
}
