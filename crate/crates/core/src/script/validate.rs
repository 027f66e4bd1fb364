use super::*;

/// Checks a parsed script for runnability. `resolve` reports whether an
/// asset path can be loaded. An empty result means the script can run.
pub fn validate(s: &InteractionScript, resolve: impl Fn(&str) -> bool) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let src = &s.source;
    let key = |map: Option<&BTreeMap<&'static str, Span>>, k: &str, fallback: Span| {
        map.and_then(|m| m.get(k)).copied().unwrap_or(fallback)
    };
    for (i, o) in s.objects.iter().enumerate() {
        let at = src.objects.get(i).copied().unwrap_or_default();
        let keys = src.object_keys.get(i);
        if !resolve(&o.splats) {
            out.push(Diagnostic::new(
                key(keys, "splats", at),
                format!("object \"{}\": cannot resolve splat asset \"{}\"", o.name, o.splats),
            ));
        }
        if let Err(e) = o.material.validate() {
            let field = material_field_of(&o.material);
            out.push(Diagnostic::new(key(keys, field, at), format!("object \"{}\": {e}", o.name)));
        }
        let q = o.pose.rotation;
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        let finite = q.iter().all(|c| c.is_finite()) && o.pose.translation.iter().all(|c| c.is_finite());
        if !(n > 1e-9) || !finite {
            out.push(Diagnostic::new(
                key(keys, "pose", at),
                format!("object \"{}\": pose rotation must be a non-zero quaternion", o.name),
            ));
        }
    }

    if let Some(l) = &s.light {
        let k = |name| key(Some(&src.light), name, Span::default());
        if !(l.direction.norm() > 1e-12) {
            out.push(Diagnostic::new(k("dir"), "light direction must be non-zero"));
        }
        if !(0.0..=1.0).contains(&l.strength) {
            out.push(Diagnostic::new(k("strength"), format!("light strength {} must be in [0, 1]", l.strength)));
        }
        if l.resolution == 0 {
            out.push(Diagnostic::new(k("resolution"), "shadow map resolution must be >= 1"));
        }
        if let Some(b) = l.bias {
            if !(b >= 0.0) {
                out.push(Diagnostic::new(k("bias"), format!("shadow bias {b} must be >= 0")));
            }
        }
    }

    if let Err(e) = s.camera.to_camera().validate() {
        out.push(Diagnostic::new(
            src.camera.values().next().copied().unwrap_or_default(),
            e.to_string(),
        ));
    }

    let m = &s.sim;
    let k = |name| key(Some(&src.sim), name, Span::default());
    let mut check = |ok: bool, name: &'static str, msg: String| {
        if !ok {
            out.push(Diagnostic::new(k(name), msg));
        }
    };
    check(m.dt > 0.0, "dt", format!("dt {} must be > 0", m.dt));
    check(m.iterations >= 1, "iters", "iters must be >= 1".into());
    check(m.substeps != Some(0), "substeps", "substeps must be >= 1".into());
    check(m.k_sigma > 0.0, "ksigma", format!("ksigma {} must be > 0", m.k_sigma));
    check(
        m.cell_band.0 >= 1 && m.cell_band.0 <= m.cell_band.1,
        "cells",
        format!("cell band {} {} must satisfy 1 <= lo <= hi", m.cell_band.0, m.cell_band.1),
    );
    if let Some(h) = m.cell_size {
        check(h > 0.0, "cell", format!("cell size {h} must be > 0"));
    }
    check(m.fps > 0.0, "fps", format!("fps {} must be > 0", m.fps));
    if let Some(d) = m.duration {
        check(d > 0.0, "duration", format!("duration {d} must be > 0"));
    }
    check(
        (0.0..=1.0).contains(&m.friction),
        "friction",
        format!("friction {} must be in [0, 1]", m.friction),
    );
    check(m.repulsion >= 0.0, "repulsion", format!("repulsion {} must be >= 0", m.repulsion));

    let mut last = 0.0;
    for (i, e) in s.timeline.iter().enumerate() {
        let at = src.events.get(i).copied().unwrap_or_default();
        if e.time < last {
            out.push(Diagnostic::new(at, format!("event time {} is before {}", e.time, last)));
        }
        last = e.time.max(last);
        if let EventKind::Set { field, value, .. } = &e.kind {
            let mut probe = Material::default();
            field.apply(&mut probe, *value);
            if let Err(err) = probe.validate() {
                out.push(Diagnostic::new(at, err.to_string()));
            }
        }
    }
    out
}

/// First material field that fails validation, as its script keyword.
fn material_field_of(m: &Material) -> &'static str {
    for f in ParamField::ALL {
        let mut probe = Material::default();
        let v = match f {
            ParamField::Youngs => m.youngs_modulus,
            ParamField::Poisson => m.poisson_ratio,
            ParamField::Density => m.density,
            ParamField::Damping => m.damping,
        };
        f.apply(&mut probe, v);
        if probe.validate().is_err() {
            return f.keyword();
        }
    }
    "youngs"
}
