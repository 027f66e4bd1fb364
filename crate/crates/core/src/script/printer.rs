use std::fmt::Write;

use super::*;

/// Shortest text that parses back to the same `f64`.
fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-4..1e9).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn vec3(v: &Vec3) -> String {
    format!("[{} {} {}]", num(v.x), num(v.y), num(v.z))
}

fn string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Canonical text: every field written out, fixed block order.
pub fn print(s: &InteractionScript) -> String {
    let mut o = String::new();
    for obj in &s.objects {
        let m = &obj.material;
        let q = obj.pose.rotation;
        let _ = writeln!(o, "object {} {{", string(&obj.name));
        let _ = writeln!(o, "  splats {};", string(&obj.splats));
        let _ = writeln!(
            o,
            "  {};",
            match obj.motion {
                Motion::Dynamic => "dynamic",
                Motion::Static => "static",
            }
        );
        let _ = writeln!(o, "  youngs {};", num(m.youngs_modulus));
        let _ = writeln!(o, "  poisson {};", num(m.poisson_ratio));
        let _ = writeln!(o, "  density {};", num(m.density));
        let _ = writeln!(o, "  damping {};", num(m.damping));
        let _ = writeln!(
            o,
            "  pose t {} r [{} {} {} {}];",
            vec3(&obj.pose.translation),
            num(q[0]),
            num(q[1]),
            num(q[2]),
            num(q[3])
        );
        o.push_str("}\n\n");
    }
    if let Some(l) = &s.light {
        o.push_str("light {\n");
        let _ = writeln!(o, "  dir {};", vec3(&l.direction));
        let _ = writeln!(o, "  strength {};", num(l.strength));
        let _ = writeln!(o, "  resolution {};", l.resolution);
        if let Some(b) = l.bias {
            let _ = writeln!(o, "  bias {};", num(b));
        }
        o.push_str("}\n\n");
    }
    let c = &s.camera;
    o.push_str("camera {\n");
    let _ = writeln!(o, "  eye {};", vec3(&c.eye));
    let _ = writeln!(o, "  target {};", vec3(&c.target));
    let _ = writeln!(o, "  up {};", vec3(&c.up));
    let _ = writeln!(o, "  fov {};", num(c.fov));
    let _ = writeln!(o, "  size {} {};", c.width, c.height);
    let _ = writeln!(o, "  near {};", num(c.near));
    let _ = writeln!(o, "  far {};", num(c.far));
    o.push_str("}\n\n");

    let m = &s.sim;
    o.push_str("sim {\n");
    let _ = writeln!(o, "  dt {};", num(m.dt));
    if let Some(n) = m.substeps {
        let _ = writeln!(o, "  substeps {n};");
    }
    let _ = writeln!(o, "  iters {};", m.iterations);
    let _ = writeln!(o, "  ksigma {};", num(m.k_sigma));
    let _ = writeln!(o, "  cells {} {};", m.cell_band.0, m.cell_band.1);
    if let Some(h) = m.cell_size {
        let _ = writeln!(o, "  cell {};", num(h));
    }
    let _ = writeln!(o, "  gravity {};", vec3(&m.gravity));
    let _ = writeln!(o, "  fps {};", num(m.fps));
    if let Some(d) = m.duration {
        let _ = writeln!(o, "  duration {};", num(d));
    }
    if let Some(g) = m.ground {
        let _ = writeln!(o, "  ground {};", num(g));
    }
    let _ = writeln!(o, "  friction {};", num(m.friction));
    let _ = writeln!(o, "  repulsion {};", num(m.repulsion));
    o.push_str("}\n\n");

    o.push_str("timeline {\n");
    for e in &s.timeline {
        let _ = write!(o, "  at {} ", num(e.time));
        match &e.kind {
            EventKind::Grab {
                object,
                point,
                radius,
            } => {
                let _ = write!(o, "grab {} point {} radius {}", string(object), vec3(point), num(*radius));
            }
            EventKind::Drag { target } => {
                let _ = write!(o, "drag to {}", vec3(target));
            }
            EventKind::Release => o.push_str("release"),
            EventKind::Set {
                object,
                field,
                value,
            } => {
                let _ = write!(o, "set {} {} {}", string(object), field.keyword(), num(*value));
            }
            EventKind::Pin { object, lo, hi } => {
                let _ = write!(o, "pin {} box {} {}", string(object), vec3(lo), vec3(hi));
            }
            EventKind::Kinematic {
                object,
                lo,
                hi,
                path,
            } => {
                let _ = write!(o, "kinematic {} box {} {} path {{", string(object), vec3(lo), vec3(hi));
                for (t, p) in path {
                    let _ = write!(o, " {} {};", num(*t), vec3(p));
                }
                o.push_str(" }");
            }
            EventKind::Remove { object } => {
                let _ = write!(o, "remove {}", string(object));
            }
        }
        o.push_str(";\n");
    }
    o.push_str("}\n");
    o
}
