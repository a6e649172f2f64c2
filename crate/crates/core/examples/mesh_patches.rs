//! Dyadic meshes of the unit square and oversampling patches.

use gllod::mesh::{expand_patch, DyadicMesh};

fn main() -> gllod::Result<()> {
    let coarse = DyadicMesh::new(3)?;
    let fine = DyadicMesh::new(5)?;
    println!(
        "coarse: {} nodes, {} triangles, h = {}",
        coarse.num_nodes(),
        coarse.num_triangles(),
        coarse.mesh_size()
    );
    let center = coarse.node_index(4, 4);
    for layers in 0..5 {
        let p = expand_patch(&coarse, &fine, center, layers)?;
        println!(
            "layers {layers}: {:3} coarse triangles, {:4} fine nodes, {:3} on the patch boundary",
            p.coarse_elements.len(),
            p.fine_nodes.len(),
            p.on_patch_boundary.iter().filter(|&&b| b).count()
        );
    }
    Ok(())
}
