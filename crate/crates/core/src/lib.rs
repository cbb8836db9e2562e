pub mod catalog;
pub mod geom;
pub mod mesh;
pub mod parts;
pub mod physics;
pub mod seed;
pub mod randomizer;
pub mod renderer;
pub mod annotate;
pub mod composer;
pub mod gan;
pub mod metrics;
pub mod pipeline;
pub mod cli;
