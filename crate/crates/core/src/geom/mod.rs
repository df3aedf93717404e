//! Box-domain tetrahedral meshes and 1D segment networks.

mod io;
mod locate;
mod mesh;
mod network;
mod random;

pub use io::{load_mesh, load_network, save_mesh, save_network};
pub use locate::PointLocator;
pub use mesh::{
    add3, build_box_mesh, cross3, dist3, dot3, norm3, scale3, sub3, BoundaryFace, FaceTag, TetGeometry, TetMesh,
};
pub use network::{split_at_junctions, Endpoint, EndpointBc, Junction, Segment, SegmentNetwork, Site};
pub use random::generate_random_network;
