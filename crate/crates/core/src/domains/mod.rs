//! Abstract domains used by the analysis.

pub mod interval;
pub mod props;
pub mod refs;
pub mod state;
pub mod typestate;

pub use interval::MultiInterval;
pub use props::{Prop, PropState, PropertyMap};
pub use refs::{Loc, ReferentSet};
pub use state::{AbstractState, BlockKind, Effect, NominalTag, PlaceFacts, SizeDep};
pub use typestate::{Atom, ResourceId, Typestate, View};
