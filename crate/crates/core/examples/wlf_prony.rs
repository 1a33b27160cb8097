//! PLA material: WLF shift factors and the discrete stress relaxation of
//! the 15-branch Prony series.

use thermorod::material::{
    build_section_tensors, history_vectors, stress_effective, update_viscous_strains, PronySeries, SectionProperties,
    StepMaterial,
};
use thermorod::so3::Vec3;

fn main() -> thermorod::Result<()> {
    let pla = PronySeries::pla_van_manen();
    for t in [31.5, 45.0, 70.0, 90.0] {
        println!("T = {t:5.1} C: a_T = {:8.4}", pla.wlf.shift_factor(t)?);
    }
    println!("instantaneous modulus {:.1} MPa", pla.instantaneous_modulus() * 1e-6);

    // unit axial strain held from t = 0 at the glass transition; branches
    // faster than the step are dropped
    let h = 1e-3;
    let mut pla = pla;
    pla.branches.retain(|b| b.tau_g >= 10.0 * h);
    let section = SectionProperties::circular(1.0, 1.0)?;
    let tensors = build_section_tensors(&pla, &section);
    let taus = pla.relaxation_times(pla.wlf.t_g)?;
    let mat = StepMaterial::new(&tensors, &taus, h);
    let strain = Vec3::new(0.0, 0.0, 1.0);
    let mut viscous = vec![Vec3::zeros(); taus.len()];
    let mut next = 1e-3;
    for k in 1..=100_000 {
        let psi = history_vectors(&strain, &viscous, &taus, h);
        let n = stress_effective(&strain, &mat.cn_bar, &psi, &tensors.cn, &mat.weights);
        viscous = update_viscous_strains(&strain, &psi, &mat.weights);
        let t = k as f64 * h;
        if t >= next - 1e-12 {
            let exact = pla.relaxation_modulus(t, pla.wlf.t_g)?;
            println!("t = {t:8.3} s: E(t) = {:8.2} MPa (series {:8.2})", n.z / section.area * 1e-6, exact * 1e-6);
            next *= 10.0;
        }
    }
    Ok(())
}
