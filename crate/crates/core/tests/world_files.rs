//! World file schema, round trips and rejection of malformed files.

use std::path::PathBuf;

use mbmf_core::env::{generate_arena, load_world, save_world, world_from_json, world_to_json, ArenaParams};
use mbmf_core::Error;
use proptest::prelude::*;

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

#[test]
fn golden_world_loads_and_reserialises_identically() {
    let text = std::fs::read_to_string(golden("line_world.json")).unwrap();
    let world = world_from_json(&text).unwrap();
    world.validate().unwrap();
    assert_eq!((world.num_states(), world.num_actions(), world.goal()), (3, 2, 2));
    assert_eq!(world.prob(1, 1, 2), 0.75);
    assert_eq!(world.prob(2, 1, 1), 0.25);
    assert_eq!(world.schedule()[0].at_step, 100);
    assert_eq!(world_to_json(&world).unwrap() + "\n", text);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.json");
    save_world(&world, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
}

fn edited(f: impl FnOnce(&mut serde_json::Value)) -> String {
    let text = std::fs::read_to_string(golden("line_world.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    f(&mut v);
    v.to_string()
}

#[test]
fn malformed_worlds_are_rejected_with_the_right_error() {
    let unnormalised = edited(|v| v["transitions"][0]["outcomes"][0]["prob"] = 0.5.into());
    assert!(matches!(world_from_json(&unnormalised), Err(Error::Normalization { state: 0, action: 0, .. })));

    let unknown = edited(|v| v["colour"] = "blue".into());
    assert!(matches!(world_from_json(&unknown), Err(Error::Parse { .. })));

    let missing = edited(|v| {
        v["transitions"].as_array_mut().unwrap().pop();
    });
    let err = world_from_json(&missing).unwrap_err();
    assert!(err.to_string().contains("missing entry"), "{err}");

    let out_of_range = edited(|v| v["transitions"][3]["outcomes"][0]["next"] = 9.into());
    assert!(world_from_json(&out_of_range).is_err());

    // States 0 and 1 become traps, so the goal is cut off from the reset state.
    let unreachable = edited(|v| {
        for i in [0, 1, 2, 3] {
            let s = v["transitions"][i]["state"].as_u64().unwrap();
            v["transitions"][i]["outcomes"] = serde_json::json!([{"next": s, "prob": 1.0}]);
        }
    });
    let world = world_from_json(&unreachable).unwrap();
    assert!(matches!(world.validate(), Err(Error::Validation(_))));
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(load_world("/nonexistent/world.json"), Err(Error::Io { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn generated_arenas_validate_and_round_trip(seed in 0u64..10_000, p_slip in 0.0f64..0.5) {
        let params = ArenaParams { p_slip, ..ArenaParams::default() };
        let arena = generate_arena(seed, &params).unwrap();
        arena.world.validate().unwrap();
        let text = world_to_json(&arena.world).unwrap();
        let back = world_from_json(&text).unwrap();
        prop_assert_eq!(world_to_json(&back).unwrap(), text);
        for s in 0..back.num_states() {
            for a in 0..back.num_actions() {
                let sum: f64 = back.outcomes(s, a).iter().map(|o| o.prob).sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }
}
