//! Parabolic implosion for semi-parabolic germs: normal forms, Fatou-coordinate models and transit.

pub mod dd;
pub mod model;
pub mod normal_form;
pub mod series;
pub mod transit;
pub mod transit2d;
