use proptest::prelude::*;

use voltplug::host::stats;
use voltplug::metering::{
    active_power, adc_to_millivolts, apparent_power, coregister, crossing_hysteresis,
    falling_crossings, lag, remove_offset, true_rms, zero_crossing, CrossingPair,
};
use voltplug::simkernel::{AdcModel, SensorChain};
use voltplug::wire::{self, AtCommand, Command, DeviceName, Frame, Password, Role};

fn interpolated(p: &CrossingPair) -> f64 {
    p.tp_us + p.vp * (p.tn_us - p.tp_us) / (p.vp - p.vn)
}

fn pair() -> impl Strategy<Value = CrossingPair> {
    (1e-3..1e3f64, -1e3..-1e-3f64, 0.0..1e9f64, 1.0..1e4f64).prop_map(|(vp, vn, tp, dt)| {
        CrossingPair::new(vp, tp, vn, tp + dt).unwrap()
    })
}

fn name() -> impl Strategy<Value = DeviceName> {
    "[ -~]{1,32}".prop_map(|s| DeviceName::new(s).unwrap())
}

fn command() -> impl Strategy<Value = Command> {
    prop_oneof![
        Just(Command::RelayOn),
        Just(Command::RelayOff),
        Just(Command::Read),
        Just(Command::Status),
        Just(Command::At(AtCommand::Test)),
        name().prop_map(|n| Command::At(AtCommand::Name(n))),
        "[0-9]{4}".prop_map(|p| Command::At(AtCommand::Password(Password::new(p).unwrap()))),
        prop_oneof![Just(Role::Slave), Just(Role::Master)].prop_map(|r| Command::At(AtCommand::Role(r))),
    ]
}

proptest! {
    #[test]
    fn zero_crossing_is_linear_interpolation(p in pair()) {
        let z = zero_crossing(&p).unwrap();
        let oracle = interpolated(&p);
        prop_assert!((z - oracle).abs() <= 1e-9 * oracle.abs().max(1.0));
        prop_assert!(z >= p.tp_us && z <= p.tn_us);
    }

    #[test]
    fn encode_decode_identity(cmd in command()) {
        let frame = wire::encode(&cmd);
        prop_assert_eq!(wire::decode(&frame).unwrap(), cmd.clone());
        prop_assert_eq!(wire::decode_bytes(&frame.to_bytes()).unwrap(), cmd);
    }

    #[test]
    fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..4096)) {
        let _ = wire::decode_bytes(&bytes);
        let mut codec = wire::LineCodec::new();
        for frame in codec.push(&bytes).into_iter().flatten() {
            prop_assert!(frame.payload().len() <= wire::MAX_PAYLOAD);
            let _ = wire::decode(&frame);
        }
    }

    #[test]
    fn frames_are_printable(s in "[ -~]{0,256}") {
        let f = Frame::new(s.clone()).unwrap();
        let back = Frame::from_bytes(&f.to_bytes()).unwrap();
        prop_assert_eq!(back.payload(), s.as_str());
    }

    #[test]
    fn quantize_inverts_code_conversion(code in 0u16..1024) {
        let adc = AdcModel::default();
        let mv = adc_to_millivolts(code).unwrap();
        prop_assert_eq!(adc.quantize(mv), (code, false));
    }

    #[test]
    fn quantize_brackets_input(mv in 0.0..5000.0f64) {
        let adc = AdcModel::default();
        let (code, saturated) = adc.quantize(mv);
        prop_assert!(!saturated);
        let low = adc_to_millivolts(code).unwrap();
        prop_assert!(low <= mv && mv < low + adc.lsb_mv());
    }

    #[test]
    fn sensor_is_affine(a in -400.0..400.0f64, b in -400.0..400.0f64, ia in -30.0..30.0f64, ib in -30.0..30.0f64) {
        let chain = SensorChain::default();
        let (v0, i0) = chain.sense(0.0, 0.0);
        let (va, ia_mv) = chain.sense(a, ia);
        let (vb, ib_mv) = chain.sense(b, ib);
        let (vab, iab) = chain.sense(a + b, ia + ib);
        prop_assert!(((vab - v0) - (va - v0) - (vb - v0)).abs() < 1e-9);
        prop_assert!(((iab - i0) - (ia_mv - i0) - (ib_mv - i0)).abs() < 1e-9);
    }

    #[test]
    fn constant_input_centers_to_zero(code in 0u16..1024, len in 70usize..300) {
        let raw: Vec<(f64, f64)> = (0..len).map(|k| (k as f64 * 500.0, code as f64)).collect();
        let c = remove_offset(&raw, 70).unwrap();
        prop_assert!(c.points.iter().all(|p| p.1 == 0.0));
    }

    #[test]
    fn power_bounded_by_apparent(
        va in 1.0..400.0f64, ia in 0.0..20.0f64, phi in -180.0..180.0f64,
        h3 in 0.0..0.5f64, t0 in 0.0..1e6f64,
    ) {
        let w = 2.0 * std::f64::consts::PI * 60.0 * 1e-6;
        let v: Vec<(f64, f64)> = (0..200).map(|k| {
            let t = t0 + k as f64 * 500.0;
            (t, va * (w * t).sin())
        }).collect();
        let i: Vec<(f64, f64)> = (0..200).map(|k| {
            let t = t0 + k as f64 * 500.0 + 112.0;
            let x = w * t - phi.to_radians();
            (t, ia * (x.sin() + h3 * (3.0 * x).sin()))
        }).collect();
        let zc = falling_crossings(&v, crossing_hysteresis(&v));
        let (vr, ir) = coregister(&v, &i);
        let p = active_power(&vr, &ir, &zc).unwrap();
        let s = apparent_power(true_rms(&vr, &zc).unwrap().rms, true_rms(&ir, &zc).unwrap().rms).unwrap();
        prop_assert!(p.abs() <= s * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn lag_is_wrapped(zc in -1e7..1e7f64, zv in -1e7..1e7f64) {
        let l = lag(zc, zv, 60.0);
        prop_assert!(l.phi_deg > -180.0 && l.phi_deg <= 180.0);
    }

    #[test]
    fn stats_invariants(values in proptest::collection::vec(-1e6..1e6f64, 2..100)) {
        let (mean, std) = stats(&values).unwrap();
        let lo = values.iter().cloned().fold(f64::MAX, f64::min);
        let hi = values.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert!(std >= 0.0);
        prop_assert!(mean >= lo - 1e-6 && mean <= hi + 1e-6);
        prop_assert!(std <= (hi - lo) + 1e-6);
    }
}
