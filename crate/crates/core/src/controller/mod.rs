//! Motion profiles and the reactive grip controller.

pub mod grip;
pub mod motion;
pub mod reactive;

pub use grip::{
    grip_update, ControllerConfig, GripEvent, GripEventKind, GripState, BASE_TORQUE, MAX_TORQUE,
    STIFF_SCALE,
};
pub use motion::{
    rotation_profile, shaking_profile, MotionDrive, MotionKind, MotionProfile, MotionSpec,
};
pub use reactive::{
    episode_motion, episode_setup, run_episode, run_fixed_episode, run_reactive_loop, EpisodeLog,
    EpisodePolicy, EpisodeRow, EpisodeSummary, ReactiveController, EPISODE_CSV_HEADER,
    ONLINE_SEGMENT_S, SUMMARY_CSV_HEADER,
};
