use superrl::envs::EnvConfig;
use superrl::trainer::{compare_regimes, Regime, TrainConfig};

#[test]
fn sparse_hybrid_row_strictly_greatest_in_most_seeds() {
    let mut wins = 0;
    let mut tables = Vec::new();
    for seed in 0..3 {
        let configs: Vec<TrainConfig> = [Regime::Rl, Regime::Sft, Regime::SftThenRl, Regime::Hybrid]
            .into_iter()
            .map(|regime| TrainConfig {
                env: EnvConfig::sparse(),
                regime,
                seed,
                ..TrainConfig::default()
            })
            .collect();
        let table = compare_regimes(&configs).unwrap();
        assert_eq!(table.rows.len(), 4);
        let hybrid = table.rows.iter().find(|r| r.regime == "Hybrid").unwrap().em;
        if table.rows.iter().filter(|r| r.regime != "Hybrid").all(|r| r.em < hybrid) {
            wins += 1;
        }
        tables.push(table.to_csv().unwrap());
    }
    assert!(wins >= 2, "Hybrid strictly greatest in {wins}/3 seeds\n{}", tables.join("\n"));
}
