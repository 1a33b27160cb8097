//! Parametric stent geometry: crowns, bridges, symmetric parts and the
//! curved device.

use thermorod::geometry::{
    assembly_configs, build_curved_stent, build_straight_stent, curved_stent_half, straight_stent_quarter,
};
use thermorod::scenario::parse_config;

fn main() -> thermorod::Result<()> {
    let layout = parse_config("stent-straight-quarter")?.stent_layout()?;
    let full = build_straight_stent(&layout)?;
    let quarter = straight_stent_quarter(&full, &layout)?;
    println!(
        "straight: {} patches, {} nodes; quarter: {} patches, {} nodes; fit residual {:.2e} m",
        full.patches.len(),
        full.nodes.len(),
        quarter.patches.len(),
        quarter.nodes.len(),
        full.max_fit_residual
    );
    let on_planes = quarter.nodes.iter().filter(|n| !n.symmetry_normals.is_empty()).count();
    println!("quarter nodes on symmetry planes: {on_planes}");

    let mut curved = parse_config("stent-curved-half")?.stent_layout()?;
    curved.control_points = 30;
    curved.fit_samples = 120;
    let full = build_curved_stent(&curved)?;
    let half = curved_stent_half(&full, &curved)?;
    let configs = assembly_configs(&half)?;
    let points: usize = configs.iter().map(|c| c.len()).sum();
    println!(
        "curved: {} patches, half: {} patches, {} collocation points, fit residual {:.2e} m",
        full.patches.len(),
        half.patches.len(),
        points,
        full.max_fit_residual
    );
    Ok(())
}
