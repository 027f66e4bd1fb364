use std::collections::{BTreeMap, HashMap};

use super::lexer::{lex, Tok, Token};
use super::*;

type PResult<T> = Result<T, Diagnostic>;

/// Parses script text. Lexical and syntax errors stop at the first error;
/// semantic errors are collected and returned together.
pub fn parse(text: &str) -> Result<InteractionScript, ScriptError> {
    let one = |d: Diagnostic| ScriptError {
        diagnostics: vec![d],
    };
    let toks = lex(text).map_err(one)?;
    let mut p = Parser {
        toks,
        pos: 0,
        script: InteractionScript::default(),
        blocks: HashMap::new(),
        errors: Vec::new(),
    };
    p.script_items().map_err(one)?;
    p.check_semantics();
    if p.errors.is_empty() {
        Ok(p.script)
    } else {
        p.errors.sort_by_key(|d| d.span);
        Err(ScriptError {
            diagnostics: p.errors,
        })
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    script: InteractionScript,
    blocks: HashMap<&'static str, Span>,
    errors: Vec<Diagnostic>,
}

const OBJECT_KEYS: &[&str] = &["splats", "dynamic", "static", "youngs", "poisson", "density", "damping", "pose"];
const LIGHT_KEYS: &[&str] = &["dir", "strength", "resolution", "bias"];
const CAMERA_KEYS: &[&str] = &["eye", "target", "up", "fov", "size", "near", "far"];
const SIM_KEYS: &[&str] = &[
    "dt", "substeps", "iters", "ksigma", "cells", "cell", "gravity", "fps", "duration", "ground",
    "friction", "repulsion",
];

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected<T>(&self, t: &Token, wanted: &str) -> PResult<T> {
        Err(Diagnostic::new(
            t.span,
            format!("expected {wanted}, found {}", t.tok.describe()),
        ))
    }

    fn expect(&mut self, tok: Tok) -> PResult<Span> {
        let t = self.next();
        if t.tok == tok {
            Ok(t.span)
        } else {
            self.unexpected(&t, &tok.describe())
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<Span> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) if s == kw => Ok(t.span),
            _ => self.unexpected(&t, &format!("'{kw}'")),
        }
    }

    fn string(&mut self) -> PResult<String> {
        let t = self.next();
        match t.tok {
            Tok::Str(s) => Ok(s),
            _ => self.unexpected(&t, "a string"),
        }
    }

    fn number(&mut self) -> PResult<f64> {
        let t = self.next();
        match t.tok {
            Tok::Num(v) => Ok(v),
            _ => self.unexpected(&t, "a number"),
        }
    }

    fn integer(&mut self) -> PResult<u32> {
        let t = self.next();
        match t.tok {
            Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => Ok(v as u32),
            _ => self.unexpected(&t, "a non-negative integer"),
        }
    }

    fn numbers<const N: usize>(&mut self) -> PResult<[f64; N]> {
        self.expect(Tok::LBracket)?;
        let mut out = [0.0; N];
        for v in out.iter_mut() {
            *v = self.number()?;
        }
        self.expect(Tok::RBracket)?;
        Ok(out)
    }

    fn vec3(&mut self) -> PResult<Vec3> {
        let [x, y, z] = self.numbers::<3>()?;
        Ok(Vec3::new(x, y, z))
    }

    /// Reads `key` from the allowed list; records duplicates under `slot`.
    fn block_key(
        &mut self,
        allowed: &'static [&'static str],
        block: &str,
        keys: &mut BTreeMap<&'static str, Span>,
    ) -> PResult<Option<&'static str>> {
        let t = self.next();
        let name = match &t.tok {
            Tok::RBrace => return Ok(None),
            Tok::Ident(s) => s.clone(),
            _ => return self.unexpected(&t, "a key or '}'"),
        };
        let Some(&key) = allowed.iter().find(|k| **k == name) else {
            return Err(Diagnostic::new(
                t.span,
                format!("unknown key '{name}' in {block} block"),
            ));
        };
        let slot = if key == "static" { "dynamic" } else { key };
        if keys.insert(slot, t.span).is_some() {
            self.errors.push(Diagnostic::new(t.span, format!("duplicate key '{name}'")));
        }
        Ok(Some(key))
    }

    fn open_block(&mut self, name: &'static str, span: Span) -> PResult<()> {
        if name != "timeline" && self.blocks.insert(name, span).is_some() {
            self.errors.push(Diagnostic::new(span, format!("duplicate {name} block")));
        }
        self.expect(Tok::LBrace).map(|_| ())
    }

    fn script_items(&mut self) -> PResult<()> {
        loop {
            let t = self.next();
            match &t.tok {
                Tok::Eof => return Ok(()),
                Tok::Ident(s) => match s.as_str() {
                    "object" => self.object(t.span)?,
                    "light" => self.light(t.span)?,
                    "camera" => self.camera(t.span)?,
                    "sim" => self.sim(t.span)?,
                    "timeline" => self.timeline(t.span)?,
                    _ => {
                        return Err(Diagnostic::new(
                            t.span,
                            format!("unknown block '{s}'"),
                        ))
                    }
                },
                _ => return self.unexpected(&t, "a block keyword"),
            }
        }
    }

    fn object(&mut self, span: Span) -> PResult<()> {
        let name = self.string()?;
        self.expect(Tok::LBrace)?;
        let mut keys = BTreeMap::new();
        let mut obj = ObjectDecl {
            name,
            splats: String::new(),
            motion: Motion::Dynamic,
            material: Material::default(),
            pose: Pose::default(),
        };
        while let Some(key) = self.block_key(OBJECT_KEYS, "object", &mut keys)? {
            match key {
                "splats" => obj.splats = self.string()?,
                "dynamic" => obj.motion = Motion::Dynamic,
                "static" => obj.motion = Motion::Static,
                "youngs" => obj.material.youngs_modulus = self.number()?,
                "poisson" => obj.material.poisson_ratio = self.number()?,
                "density" => obj.material.density = self.number()?,
                "damping" => obj.material.damping = self.number()?,
                _ => {
                    // pose [t vec3] [r vec4]
                    let mut any = false;
                    if matches!(&self.peek().tok, Tok::Ident(s) if s == "t") {
                        self.next();
                        obj.pose.translation = self.vec3()?;
                        any = true;
                    }
                    if matches!(&self.peek().tok, Tok::Ident(s) if s == "r") {
                        self.next();
                        obj.pose.rotation = self.numbers::<4>()?;
                        any = true;
                    }
                    if !any {
                        let t = self.peek().clone();
                        return self.unexpected(&t, "'t' or 'r'");
                    }
                }
            }
            self.expect(Tok::Semi)?;
        }
        if obj.splats.is_empty() && !keys.contains_key("splats") {
            self.errors.push(Diagnostic::new(
                span,
                format!("object \"{}\" has no splats", obj.name),
            ));
        }
        self.script.objects.push(obj);
        self.script.source.objects.push(span);
        self.script.source.object_keys.push(keys);
        Ok(())
    }

    fn light(&mut self, span: Span) -> PResult<()> {
        self.open_block("light", span)?;
        let mut keys = BTreeMap::new();
        let mut l = LightSpec::default();
        while let Some(key) = self.block_key(LIGHT_KEYS, "light", &mut keys)? {
            match key {
                "dir" => l.direction = self.vec3()?,
                "strength" => l.strength = self.number()?,
                "resolution" => l.resolution = self.integer()?,
                _ => l.bias = Some(self.number()?),
            }
            self.expect(Tok::Semi)?;
        }
        self.script.light = Some(l);
        self.script.source.light = keys;
        Ok(())
    }

    fn camera(&mut self, span: Span) -> PResult<()> {
        self.open_block("camera", span)?;
        let mut keys = BTreeMap::new();
        let c = &mut self.script.camera.clone();
        while let Some(key) = self.block_key(CAMERA_KEYS, "camera", &mut keys)? {
            match key {
                "eye" => c.eye = self.vec3()?,
                "target" => c.target = self.vec3()?,
                "up" => c.up = self.vec3()?,
                "fov" => c.fov = self.number()?,
                "size" => {
                    c.width = self.integer()?;
                    c.height = self.integer()?;
                }
                "near" => c.near = self.number()?,
                _ => c.far = self.number()?,
            }
            self.expect(Tok::Semi)?;
        }
        self.script.camera = c.clone();
        self.script.source.camera = keys;
        Ok(())
    }

    fn sim(&mut self, span: Span) -> PResult<()> {
        self.open_block("sim", span)?;
        let mut keys = BTreeMap::new();
        let s = &mut self.script.sim.clone();
        while let Some(key) = self.block_key(SIM_KEYS, "sim", &mut keys)? {
            match key {
                "dt" => s.dt = self.number()?,
                "substeps" => s.substeps = Some(self.integer()?),
                "iters" => s.iterations = self.integer()?,
                "ksigma" => s.k_sigma = self.number()?,
                "cells" => s.cell_band = (self.integer()?, self.integer()?),
                "cell" => s.cell_size = Some(self.number()?),
                "gravity" => s.gravity = self.vec3()?,
                "fps" => s.fps = self.number()?,
                "duration" => s.duration = Some(self.number()?),
                "ground" => s.ground = Some(self.number()?),
                "friction" => s.friction = self.number()?,
                _ => s.repulsion = self.number()?,
            }
            self.expect(Tok::Semi)?;
        }
        self.script.sim = s.clone();
        self.script.source.sim = keys;
        Ok(())
    }

    fn timeline(&mut self, _span: Span) -> PResult<()> {
        self.expect(Tok::LBrace)?;
        loop {
            let t = self.next();
            match &t.tok {
                Tok::RBrace => return Ok(()),
                Tok::Ident(s) if s == "at" => {
                    let time = self.number()?;
                    let kind = self.action()?;
                    self.expect(Tok::Semi)?;
                    self.script.timeline.push(Event { time, kind });
                    self.script.source.events.push(t.span);
                }
                _ => return self.unexpected(&t, "'at' or '}'"),
            }
        }
    }

    fn action(&mut self) -> PResult<EventKind> {
        let t = self.next();
        let Tok::Ident(verb) = &t.tok else {
            return self.unexpected(&t, "an event");
        };
        Ok(match verb.as_str() {
            "grab" => {
                let object = self.string()?;
                self.keyword("point")?;
                let point = self.vec3()?;
                self.keyword("radius")?;
                let radius = self.number()?;
                EventKind::Grab {
                    object,
                    point,
                    radius,
                }
            }
            "drag" => {
                self.keyword("to")?;
                EventKind::Drag {
                    target: self.vec3()?,
                }
            }
            "release" => EventKind::Release,
            "set" => {
                let object = self.string()?;
                let ft = self.next();
                let field = match &ft.tok {
                    Tok::Ident(s) => ParamField::from_keyword(s),
                    _ => None,
                };
                let Some(field) = field else {
                    return self.unexpected(&ft, "youngs, poisson, density or damping");
                };
                EventKind::Set {
                    object,
                    field,
                    value: self.number()?,
                }
            }
            "pin" => {
                let object = self.string()?;
                self.keyword("box")?;
                EventKind::Pin {
                    object,
                    lo: self.vec3()?,
                    hi: self.vec3()?,
                }
            }
            "kinematic" => {
                let object = self.string()?;
                self.keyword("box")?;
                let lo = self.vec3()?;
                let hi = self.vec3()?;
                self.keyword("path")?;
                self.expect(Tok::LBrace)?;
                let mut path = Vec::new();
                while self.peek().tok != Tok::RBrace {
                    let time = self.number()?;
                    let offset = self.vec3()?;
                    self.expect(Tok::Semi)?;
                    path.push((time, offset));
                }
                self.next();
                EventKind::Kinematic {
                    object,
                    lo,
                    hi,
                    path,
                }
            }
            "remove" => EventKind::Remove {
                object: self.string()?,
            },
            other => {
                return Err(Diagnostic::new(t.span, format!("unknown event '{other}'")));
            }
        })
    }

    fn check_semantics(&mut self) {
        let s = &self.script;
        let src = &s.source;
        let mut errs = Vec::new();
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, o) in s.objects.iter().enumerate() {
            if seen.insert(&o.name, i).is_some() {
                errs.push(Diagnostic::new(
                    src.objects[i],
                    format!("duplicate object name \"{}\"", o.name),
                ));
            }
        }
        let mut last = 0.0;
        let mut holding = false;
        for (e, &span) in s.timeline.iter().zip(&src.events) {
            let mut err = |m: String| errs.push(Diagnostic::new(span, m));
            if e.time < 0.0 {
                err(format!("event time {} is negative", e.time));
            }
            if e.time < last {
                err(format!("event time {} is before {}", e.time, last));
            }
            last = e.time.max(last);
            let needs_dynamic = match &e.kind {
                EventKind::Grab { object, .. }
                | EventKind::Set { object, .. }
                | EventKind::Pin { object, .. }
                | EventKind::Kinematic { object, .. } => Some(object),
                _ => None,
            };
            if let Some(name) = needs_dynamic {
                match seen.get(name.as_str()) {
                    None => err(format!("unknown object \"{name}\"")),
                    Some(&i) if s.objects[i].motion == Motion::Static => {
                        err(format!("object \"{name}\" is static"))
                    }
                    _ => {}
                }
            }
            match &e.kind {
                EventKind::Grab { radius, .. } => {
                    if holding {
                        err("grab while a grab is active".into());
                    }
                    if !(*radius > 0.0) {
                        err(format!("grab radius {radius} must be > 0"));
                    }
                    holding = true;
                }
                EventKind::Drag { .. } if !holding => err("drag without grab".into()),
                EventKind::Release => {
                    if !holding {
                        err("release without grab".into());
                    }
                    holding = false;
                }
                EventKind::Pin { lo, hi, .. } | EventKind::Kinematic { lo, hi, .. }
                    if (0..3).any(|a| lo[a] > hi[a]) =>
                {
                    err("box corners are not ordered lo <= hi".into())
                }
                _ => {}
            }
            if let EventKind::Kinematic { path, .. } = &e.kind {
                if path.is_empty() {
                    err("kinematic path is empty".into());
                }
                if path.windows(2).any(|w| w[1].0 < w[0].0) || path.iter().any(|p| p.0 < 0.0) {
                    err("kinematic path times must be non-negative and sorted".into());
                }
            }
            if let EventKind::Remove { object } = &e.kind {
                if !seen.contains_key(object.as_str()) {
                    err(format!("unknown object \"{object}\""));
                }
            }
        }
        self.errors.extend(errs);
    }
}
