use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn errors(text: &str) -> Vec<Diagnostic> {
    parse(text).unwrap_err().diagnostics
}

fn first_error(text: &str) -> (u32, u32, String) {
    let d = errors(text).remove(0);
    (d.span.line, d.span.col, d.message)
}

const SAMPLE: &str = r#"
object "bar" {
  splats "bar.ply";   # trailing comment
  dynamic;
  youngs 1e4;
  pose t [0 0.5 0];
}
sim { dt 1e-4; iters 10; ksigma 2; }
timeline {
  at 0.2 grab "bar" point [0.4 0.5 0] radius 0.05;
  at 0.3 drag to [0.4 0.7 0];
  at 0.8 release;
}
"#;

#[test]
fn minimal_script_gets_default_material() {
    let s = parse("object \"a\" { splats \"a.ply\"; }\ntimeline { }").unwrap();
    assert_eq!(s.objects.len(), 1);
    let m = s.objects[0].material;
    assert_eq!((m.youngs_modulus, m.poisson_ratio, m.density), (1000.0, 0.3, 1000.0));
    assert_eq!(s.objects[0].motion, Motion::Dynamic);
    assert!(s.timeline.is_empty());
    assert!(s.light.is_none());
}

#[test]
fn sample_parses() {
    let s = parse(SAMPLE).unwrap();
    assert_eq!(s.objects[0].material.youngs_modulus, 1e4);
    assert_eq!(s.objects[0].pose.translation, Vec3::new(0.0, 0.5, 0.0));
    assert_eq!(s.timeline.len(), 3);
    assert_eq!(
        s.timeline[0].kind,
        EventKind::Grab {
            object: "bar".into(),
            point: Vec3::new(0.4, 0.5, 0.0),
            radius: 0.05
        }
    );
    assert_eq!(s.source.events[1], Span::new(11, 3));
    assert_eq!(s.sim.substeps_per_frame(), 400);
}

#[test]
fn drag_before_grab_is_rejected() {
    let errs = errors("object \"a\" { splats \"a\"; }\ntimeline { at 0.5 drag to [0 0 0]; }");
    assert_eq!(errs.len(), 1);
    assert_eq!(errs[0].message, "drag without grab");
    assert_eq!(errs[0].span, Span::new(2, 12));
}

#[test]
fn semantic_errors_are_collected() {
    let text = r#"
object "a" { splats "a"; }
object "a" { splats "b"; }
object "s" { splats "c"; static; }
object "n" { youngs 5; }
timeline {
  at 1 release;
  at 0.5 grab "s" point [0 0 0] radius 0;
  at 0.6 grab "ghost" point [0 0 0] radius 1;
}
"#;
    let msgs: Vec<String> = errors(text).into_iter().map(|d| d.to_string()).collect();
    let expected = [
        "3:1: duplicate object name \"a\"",
        "5:1: object \"n\" has no splats",
        "7:3: release without grab",
        "8:3: event time 0.5 is before 1",
        "8:3: object \"s\" is static",
        "8:3: grab radius 0 must be > 0",
        "9:3: event time 0.6 is before 1",
        "9:3: unknown object \"ghost\"",
        "9:3: grab while a grab is active",
    ];
    for e in expected {
        assert!(msgs.iter().any(|m| m == e), "missing {e:?} in {msgs:#?}");
    }
    assert_eq!(msgs.len(), expected.len());
}

#[test]
fn duplicate_keys_and_blocks() {
    let errs = errors("object \"a\" { splats \"a\"; static; dynamic; }\nsim { }\nsim { dt 1; dt 2; }");
    let msgs: Vec<_> = errors_text(&errs);
    assert_eq!(
        msgs,
        ["1:34: duplicate key 'dynamic'", "3:1: duplicate sim block", "3:13: duplicate key 'dt'"]
    );
}

fn errors_text(d: &[Diagnostic]) -> Vec<String> {
    d.iter().map(ToString::to_string).collect()
}

#[test]
fn syntax_errors_have_positions() {
    assert_eq!(first_error("object \"a\" {\n  splat \"x\";\n}"), (2, 3, "unknown key 'splat' in object block".into()));
    assert_eq!(first_error("light { dir [0 1]; }").2, "expected a number, found ']'");
    assert_eq!(first_error("light { dir [0 1]; }").1, 17);
    assert_eq!(first_error("objekt"), (1, 1, "unknown block 'objekt'".into()));
    assert_eq!(first_error("sim { iters 2.5; }"), (1, 13, "expected a non-negative integer, found number 2.5".into()));
    assert_eq!(first_error("timeline { at 1 jump; }"), (1, 17, "unknown event 'jump'".into()));
    assert_eq!(first_error("timeline { at 1 release }").2, "expected ';', found '}'");
    assert_eq!(first_error("camera {"), (1, 9, "expected a key or '}', found end of input".into()));
}

#[test]
fn lexical_errors_have_positions() {
    assert_eq!(first_error("sim { dt 1e; }"), (1, 10, "malformed exponent".into()));
    assert_eq!(first_error("sim {\n dt @; }"), (2, 5, "unexpected character '@'".into()));
    assert_eq!(first_error("object \"abc"), (1, 8, "unterminated string".into()));
    assert_eq!(first_error("object \"a\\q\""), (1, 11, "unknown escape".into()));
    assert_eq!(first_error("sim { dt 1e999; }"), (1, 10, "number 1e999 out of range".into()));
    assert_eq!(first_error("sim { dt 1.2.3; }").2, "malformed number");
    assert_eq!(first_error("sim { dt -; }").2, "malformed number");
}

#[test]
fn number_forms() {
    let s = parse("sim { dt .5; fps +25; friction 1.; gravity [-1E-1 2e+0 0]; }").unwrap();
    assert_eq!(s.sim.dt, 0.5);
    assert_eq!(s.sim.fps, 25.0);
    assert_eq!(s.sim.friction, 1.0);
    assert_eq!(s.sim.gravity, Vec3::new(-0.1, 2.0, 0.0));
}

#[test]
fn print_round_trips() {
    let s = parse(SAMPLE).unwrap();
    let text = print(&s);
    let again = parse(&text).unwrap();
    assert_eq!(again, s);
    assert_eq!(print(&again), text);
}

#[test]
fn printed_numbers_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..2000 {
        let v: f64 = rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-30..30));
        let s = InteractionScript {
            sim: SimSpec {
                gravity: Vec3::new(v, -v, v * 3.0),
                ..SimSpec::default()
            },
            ..InteractionScript::default()
        };
        assert_eq!(parse(&print(&s)).unwrap(), s);
    }
}

#[test]
fn inserted_bad_token_is_located() {
    let lines: Vec<&str> = SAMPLE.lines().collect();
    // Insert a stray key at the start of every statement line inside a block.
    for (i, line) in lines.iter().enumerate() {
        let trimmed = line.trim_start();
        if !line.starts_with("  ") || trimmed.starts_with('#') {
            continue;
        }
        let col = line.len() - trimmed.len() + 1;
        let mut edited: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        edited[i] = format!("{}bogus {}", &line[..col - 1], trimmed);
        let (l, c, _) = first_error(&edited.join("\n"));
        assert_eq!((l, c), (i as u32 + 1, col as u32), "line {i}: {}", edited[i]);
    }
    // A stray character anywhere outside strings and comments.
    for (i, line) in lines.iter().enumerate() {
        for (j, ch) in line.char_indices() {
            if ch != ' ' || line[..j].contains('"') || line[..j].contains('#') {
                continue;
            }
            let mut edited: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
            edited[i] = format!("{}@{}", &line[..j], &line[j..]);
            let (l, c, m) = first_error(&edited.join("\n"));
            assert_eq!((l, c), (i as u32 + 1, j as u32 + 1));
            assert_eq!(m, "unexpected character '@'");
        }
    }
}

#[test]
fn validate_reports_runnability() {
    let s = parse(SAMPLE).unwrap();
    assert!(validate(&s, |_| true).is_empty());

    let d = validate(&s, |_| false);
    assert_eq!(d.len(), 1);
    assert!(d[0].message.contains("\"bar.ply\""));
    assert_eq!(d[0].span, Span::new(3, 3));

    let bad = parse("object \"a\" { splats \"a\";\n poisson 0.6; }").unwrap();
    let d = validate(&bad, |_| true);
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].span, Span::new(2, 2));
    assert!(d[0].message.contains("0.5"), "{}", d[0].message);

    let bad = parse("sim { dt 0; friction 2; }\nlight { dir [0 0 0]; }\ncamera { near 5; far 1; }\nobject \"a\" { splats \"a\"; pose r [0 0 0 0]; }\ntimeline { at 0 set \"a\" poisson 0.5; }").unwrap();
    let msgs = errors_text(&validate(&bad, |_| true));
    assert_eq!(msgs.len(), 6, "{msgs:#?}");
}

#[test]
fn parser_is_total_on_random_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let alphabet: Vec<u8> = b"object light camera sim timeline at grab drag to release set pin box kinematic path remove splats dynamic static pose t r \"{}[];#\n -+.eE0123456789abc_\\".to_vec();
    for i in 0..1_000_000 {
        let len = rng.random_range(0..48);
        let bytes: Vec<u8> = if i % 2 == 0 {
            (0..len).map(|_| rng.random()).collect()
        } else {
            (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
        };
        let text = String::from_utf8_lossy(&bytes);
        let _ = parse(&text);
    }
    // Mutations of a valid script.
    let base = SAMPLE.as_bytes();
    for _ in 0..20_000 {
        let mut b = base.to_vec();
        for _ in 0..rng.random_range(1..4) {
            let at = rng.random_range(0..b.len());
            match rng.random_range(0..3) {
                0 => b[at] = rng.random(),
                1 => {
                    b.remove(at);
                }
                _ => b.insert(at, alphabet[rng.random_range(0..alphabet.len())]),
            }
        }
        if let Ok(s) = parse(&String::from_utf8_lossy(&b)) {
            assert_eq!(parse(&print(&s)).unwrap(), s);
        }
    }
}

#[test]
fn param_field_codes() {
    for f in ParamField::ALL {
        assert_eq!(ParamField::from_code(f.code()), Some(f));
        assert_eq!(ParamField::from_keyword(f.keyword()), Some(f));
    }
    assert_eq!(ParamField::from_code(4), None);
}
