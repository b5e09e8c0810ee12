use super::EnvConfig;

/// Optimal traversal time: shortest path length at full speed.
pub fn optimal_time(l_path: f64, cfg: &EnvConfig) -> f64 {
    l_path / cfg.speed_max
}

/// Success-weighted normalized goal time with the actual time clipped to
/// `[alpha * OT, beta * OT]`. Zero for failed episodes.
pub fn sgt(success: bool, l_path: f64, actual_time: f64, cfg: &EnvConfig) -> f64 {
    if !success {
        return 0.0;
    }
    let ot = optimal_time(l_path, cfg);
    ot / actual_time.clamp(cfg.sgt_alpha * ot, cfg.sgt_beta * ot)
}

/// `OT / AT` without clipping, reported alongside the clipped score.
pub fn sgt_unclipped(success: bool, l_path: f64, actual_time: f64, cfg: &EnvConfig) -> f64 {
    if !success || actual_time <= 0.0 {
        return 0.0;
    }
    optimal_time(l_path, cfg) / actual_time
}
