use proptest::prelude::*;
use urbanbound::ingest::{
    assemble_survey, parse_population, parse_trips, validate_survey, PopulationRecord, TripRecord,
    ZoneRef,
};
use urbanbound::synth::random_survey;

#[test]
fn santiago_trip_expansion_totals() {
    // 78,820 surveyed trips whose expansion factors sum to 18,461,134
    let mut csv = String::from("origin,destination,count,expansion_factor\n");
    let zones = 45;
    for i in 0..78_820usize {
        let factor = if i < 17_254 { 235 } else { 234 };
        csv.push_str(&format!(
            "z{:02},z{:02},1,{factor}\n",
            i % zones,
            (i * 7 + i / zones) % zones
        ));
    }
    let trips = parse_trips(csv.as_bytes(), "Santiago").unwrap();
    assert_eq!(trips.len(), 78_820);
    let s = assemble_survey(&trips, &[], "Santiago").unwrap();
    assert_eq!(s.total_trips(), 18_461_134.0);
}

#[test]
fn arica_population_expansion_totals() {
    let csv = "zone,count,expansion_factor\nnorth,1214,32\nsouth,4975,31\n";
    let pops = parse_population(csv.as_bytes(), "Arica").unwrap();
    let surveyed: f64 = [1214.0, 4975.0].iter().sum();
    assert_eq!(surveyed, 6_189.0);
    let s = assemble_survey(&[], &pops, "Arica").unwrap();
    assert_eq!(s.total_population(), 193_073.0);
    let report = validate_survey(&s);
    assert!(report.warnings.iter().any(|w| w.contains("no trips")));
}

fn trip(s: &str, o: u8, d: u8, w: f64) -> TripRecord {
    TripRecord {
        origin: ZoneRef::new(s, format!("z{o}")).unwrap(),
        destination: ZoneRef::new(s, format!("z{d}")).unwrap(),
        weight: w,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(seed in any::<u64>(), n in 1usize..30) {
        let s = random_survey(seed, n);
        let mut t = Vec::new();
        let mut p = Vec::new();
        s.write_trips_csv(&mut t).unwrap();
        s.write_population_csv(&mut p).unwrap();
        let trips = parse_trips(t.as_slice(), s.id()).unwrap();
        let pops = parse_population(p.as_slice(), s.id()).unwrap();
        let back = assemble_survey(&trips, &pops, s.id()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn assembly_ignores_row_order(
        rows in prop::collection::vec((0u8..8, 0u8..8, 0.0f64..1e6), 1..60),
        rotate in 0usize..60,
        reverse in any::<bool>(),
    ) {
        let records: Vec<TripRecord> = rows.iter().map(|&(o, d, w)| trip("S", o, d, w)).collect();
        let mut shuffled = records.clone();
        let k = rotate % shuffled.len();
        shuffled.rotate_left(k);
        if reverse {
            shuffled.reverse();
        }
        let a = assemble_survey(&records, &[], "S").unwrap();
        let b = assemble_survey(&shuffled, &[], "S").unwrap();
        prop_assert_eq!(a.total_trips().to_bits(), b.total_trips().to_bits());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn total_trips_is_sum_of_weights(rows in prop::collection::vec((0u8..6, 0u8..6, 0u32..10_000), 0..50)) {
        // integral weights sum exactly in any order
        let records: Vec<TripRecord> = rows.iter().map(|&(o, d, w)| trip("S", o, d, w as f64)).collect();
        let pops: Vec<PopulationRecord> = (0..6u8)
            .map(|z| PopulationRecord { zone: ZoneRef::new("S", format!("z{z}")).unwrap(), population: 1.0 })
            .collect();
        let s = assemble_survey(&records, &pops, "S").unwrap();
        let expect: u64 = rows.iter().map(|r| r.2 as u64).sum();
        prop_assert_eq!(s.total_trips(), expect as f64);
        prop_assert!(s.directed_trips().all(|(o, d, _)| s.zone_index(o).is_some() && s.zone_index(d).is_some()));
    }
}
