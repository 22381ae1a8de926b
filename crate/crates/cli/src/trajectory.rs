//! Trajectory dump persistence (JSON).

use std::fs;
use std::path::Path;

use crashcoach_core::record::TrajectoryDump;

use crate::Result;

pub fn save_trajectory(dump: &TrajectoryDump, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(dump)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_trajectory(path: &Path) -> Result<TrajectoryDump> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crashcoach_core::gridworld::GridButtonsConfig;

    #[test]
    fn json_round_trip() {
        let dump = TrajectoryDump {
            config: GridButtonsConfig::desk_layout(),
            mask: vec![true, false],
            executed: vec![vec![4, 4]],
            positions: vec![vec![(0, 0), (5, 5)]],
            rewards: vec![-1.0],
            success: false,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        save_trajectory(&dump, &path).unwrap();
        assert_eq!(load_trajectory(&path).unwrap(), dump);
    }
}
