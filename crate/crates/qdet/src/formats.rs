//! Text formats: expression JSON, determinant files, flowchart JSON and schedules.

use std::collections::{BTreeMap, HashMap};

use qdet_core::analyzer::{Instance, Schedule};
use qdet_core::expr::{Const, Kind};
use qdet_core::flowchart::FlowchartError;
use qdet_core::qterm::QError;
use qdet_core::*;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("expression: {0}")]
    Expr(String),
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error(transparent)]
    Flowchart(#[from] FlowchartError),
    #[error(transparent)]
    Term(#[from] QError),
}

fn bad(reason: impl Into<String>) -> FormatError {
    FormatError::Expr(reason.into())
}

fn at_line(line: usize) -> impl Fn(FormatError) -> FormatError {
    move |e| match e {
        FormatError::Line { .. } => e,
        other => FormatError::Line { line, reason: other.to_string() },
    }
}

// ---- expressions

fn write_expr(ar: &ExprArena, id: ExprId, defs: &HashMap<ExprId, usize>, body: bool, out: &mut String) {
    if !body {
        if let Some(k) = defs.get(&id) {
            out.push_str(&format!("\"${k}\""));
            return;
        }
    }
    match ar.node(id) {
        Node::Var(v) => out.push_str(&Json::String(v.to_string()).to_string()),
        Node::Const(Const::Num(s)) => out.push_str(s),
        Node::Const(Const::Bool(b)) => out.push_str(if *b { "true" } else { "false" }),
        Node::Unary(op, a) => {
            out.push_str(&format!("{{\"op\":\"{}\",\"od\":", op.name()));
            write_expr(ar, *a, defs, false, out);
            out.push('}');
        }
        Node::Binary(op, a, b) => {
            out.push_str(&format!("{{\"op\":\"{}\",\"fO\":", op.name()));
            write_expr(ar, *a, defs, false, out);
            out.push_str(",\"sO\":");
            write_expr(ar, *b, defs, false, out);
            out.push('}');
        }
    }
}

/// Compact JSON tree of `id`.
pub fn serialize_expr(ar: &ExprArena, id: ExprId) -> String {
    let mut s = String::new();
    write_expr(ar, id, &HashMap::new(), true, &mut s);
    s
}

fn read_json(text: &str) -> Result<Json, serde_json::Error> {
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    let v = Json::deserialize(&mut de)?;
    de.end()?;
    Ok(v)
}

/// Operation by name, or by symbol with `-` read as negation when unary.
pub fn parse_op(s: &str, unary: bool) -> Option<Op> {
    if let Some(op) = Op::from_name(s) {
        return Some(op);
    }
    let arity = if unary { 1 } else { 2 };
    Op::ALL.iter().copied().find(|op| op.symbol() == s && op.arity() == arity)
}

fn json_to_expr(
    ar: &mut ExprArena,
    v: &Json,
    want: Option<Kind>,
    defs: &[ExprId],
) -> Result<ExprId, FormatError> {
    match v {
        Json::String(s) => {
            if let Some(k) = s.strip_prefix('$') {
                let k: usize = k.parse().map_err(|_| bad(format!("bad reference `{s}`")))?;
                return defs
                    .get(k.wrapping_sub(1))
                    .copied()
                    .ok_or_else(|| bad(format!("undefined reference `{s}`")));
            }
            let var = VarRef::parse(s).map_err(|e| bad(e.to_string()))?;
            Ok(match want {
                Some(Kind::Bool) => ar.bool_var(var),
                _ => ar.var(var),
            })
        }
        Json::Number(n) => {
            let c = Const::parse_num(&n.to_string()).map_err(|e| bad(e.to_string()))?;
            Ok(ar.constant(c))
        }
        Json::Bool(b) => Ok(ar.boolean(*b)),
        Json::Object(m) => {
            let name = m.get("op").and_then(Json::as_str).ok_or_else(|| bad("missing \"op\""))?;
            if let Some(od) = m.get("od") {
                if m.len() != 2 {
                    return Err(bad("unary node takes keys op and od"));
                }
                let op = parse_op(name, true)
                    .filter(|o| o.arity() == 1)
                    .ok_or_else(|| bad(format!("`{name}` is not a unary operation")))?;
                let a = json_to_expr(ar, od, op.operand_kind(), defs)?;
                return ar.unary(op, a).map_err(|e| bad(e.to_string()));
            }
            let (Some(f), Some(s)) = (m.get("fO"), m.get("sO")) else {
                return Err(bad("binary node needs fO and sO"));
            };
            if m.len() != 3 {
                return Err(bad("binary node takes keys op, fO and sO"));
            }
            let op = parse_op(name, false)
                .filter(|o| o.arity() == 2)
                .ok_or_else(|| bad(format!("`{name}` is not a binary operation")))?;
            let (a, b) = match op.operand_kind() {
                Some(k) => (json_to_expr(ar, f, Some(k), defs)?, json_to_expr(ar, s, Some(k), defs)?),
                // equality: a bare variable takes the kind of the other side
                None if f.is_string() && !s.is_string() => {
                    let b = json_to_expr(ar, s, None, defs)?;
                    let a = json_to_expr(ar, f, Some(ar.kind(b)), defs)?;
                    (a, b)
                }
                None => {
                    let a = json_to_expr(ar, f, None, defs)?;
                    let b = json_to_expr(ar, s, Some(ar.kind(a)), defs)?;
                    (a, b)
                }
            };
            ar.binary(op, a, b).map_err(|e| bad(e.to_string()))
        }
        _ => Err(bad(format!("unexpected JSON value {v}"))),
    }
}

/// Parses expression JSON into `ar`; equal trees get equal ids.
pub fn parse_expr(ar: &mut ExprArena, text: &str) -> Result<ExprId, FormatError> {
    json_to_expr(ar, &read_json(text)?, None, &[])
}

// ---- determinant files

/// Expanded tree size above which a file names shared subexpressions.
const TREE_LIMIT: u64 = 200_000;
const DEPTH_LIMIT: u32 = 256;
/// In shared form, nodes at levels divisible by this are also named, bounding nesting.
const DEF_STRIDE: u32 = 32;

fn shared_nodes(ar: &ExprArena, roots: &[ExprId]) -> Vec<ExprId> {
    let reach = ar.reachable(roots);
    let mut size = vec![0u64; ar.len()];
    for &n in &reach {
        size[n.index()] = ar.node(n).operands().fold(1u64, |s, o| s.saturating_add(size[o.index()]));
    }
    let total = roots.iter().fold(0u64, |s, r| s.saturating_add(size[r.index()]));
    let deep = roots.iter().any(|&r| ar.level(r) > DEPTH_LIMIT);
    if total <= TREE_LIMIT && !deep {
        return Vec::new();
    }
    let mut refs = vec![0u32; ar.len()];
    for &n in &reach {
        for o in ar.node(n).operands() {
            refs[o.index()] += 1;
        }
    }
    for r in roots {
        refs[r.index()] += 1;
    }
    reach
        .into_iter()
        .filter(|&n| !ar.node(n).is_leaf() && (refs[n.index()] > 1 || ar.level(n).is_multiple_of(DEF_STRIDE)))
        .collect()
}

/// The determinant file: `#param` and `#iterations` headers, then one line
/// `var = guard ; value` per pair, with a single space for the guard of an
/// unconditional term.
///
/// Determinants whose expansion would be very large or deep first list
/// `#def k = expr` lines, and the expressions refer to them as `"$k"`.
pub fn serialize_qdet(q: &QDeterminant) -> String {
    let ar = &q.arena;
    let named = shared_nodes(ar, &q.listed_expressions());
    let defs: HashMap<ExprId, usize> = named.iter().enumerate().map(|(k, &n)| (n, k + 1)).collect();
    let expr = |id: ExprId| {
        let mut s = String::new();
        write_expr(ar, id, &defs, false, &mut s);
        s
    };
    let mut out = String::new();
    for (k, v) in q.params() {
        out.push_str(&format!("#param {k}={v}\n"));
    }
    if q.iterations() > 0 {
        out.push_str(&format!("#iterations {}\n", q.iterations()));
    }
    for (k, &n) in named.iter().enumerate() {
        let mut s = String::new();
        write_expr(ar, n, &defs, true, &mut s);
        out.push_str(&format!("#def {} = {s}\n", k + 1));
    }
    for (v, t) in q.outputs() {
        match t {
            QTerm::Unconditional(w) => out.push_str(&format!("{v} =   ; {}\n", expr(*w))),
            _ => {
                for p in t.pairs() {
                    out.push_str(&format!("{v} = {} ; {}\n", expr(p.guard), expr(p.value)));
                }
            }
        }
    }
    out
}

/// Reads a determinant file. A term with as many pairs as the iteration bound
/// is read as truncated.
type Pair = (Option<ExprId>, ExprId);

pub fn parse_qdet(text: &str) -> Result<QDeterminant, FormatError> {
    let mut ar = ExprArena::new();
    let mut params = BTreeMap::new();
    let mut iterations = 0u32;
    let mut defs: Vec<ExprId> = Vec::new();
    let mut terms: BTreeMap<VarRef, (usize, Vec<Pair>)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |reason: &str| FormatError::Line { line, reason: reason.to_string() };
        if raw.trim().is_empty() {
            continue;
        }
        if let Some(rest) = raw.strip_prefix("#param ") {
            let (k, v) = rest.split_once('=').ok_or_else(|| err("expected #param name=value"))?;
            let v: i64 = v.trim().parse().map_err(|_| err("parameter value is not an integer"))?;
            params.insert(k.trim().to_string(), v);
        } else if let Some(rest) = raw.strip_prefix("#iterations ") {
            iterations = rest.trim().parse().map_err(|_| err("iteration bound is not an integer"))?;
        } else if let Some(rest) = raw.strip_prefix("#def ") {
            let (k, body) = rest.split_once(" = ").ok_or_else(|| err("expected #def k = expr"))?;
            if k.trim().parse::<usize>().ok() != Some(defs.len() + 1) {
                return Err(err("definitions must be numbered 1, 2, ... in order"));
            }
            let v = read_json(body).map_err(|e| err(&e.to_string()))?;
            defs.push(json_to_expr(&mut ar, &v, None, &defs).map_err(at_line(line))?);
        } else if raw.starts_with('#') {
            return Err(err("unknown header line"));
        } else {
            let (var, rest) = raw.split_once(" = ").ok_or_else(|| err("expected `var = guard ; value`"))?;
            let (g, w) = rest.split_once(';').ok_or_else(|| err("missing `;` between guard and value"))?;
            let var = VarRef::parse(var).map_err(|e| err(&e.to_string()))?;
            let guard = if g.trim().is_empty() {
                None
            } else {
                let v = read_json(g.trim()).map_err(|e| err(&e.to_string()))?;
                Some(json_to_expr(&mut ar, &v, Some(Kind::Bool), &defs).map_err(at_line(line))?)
            };
            let v = read_json(w.trim()).map_err(|e| err(&e.to_string()))?;
            let value = json_to_expr(&mut ar, &v, None, &defs).map_err(at_line(line))?;
            terms.entry(var).or_insert_with(|| (line, Vec::new())).1.push((guard, value));
        }
    }
    let mut q = QDeterminant::new(ar, params, iterations);
    for (v, (line, pairs)) in terms {
        let term = match pairs.as_slice() {
            [(None, w)] => QTerm::Unconditional(*w),
            _ if pairs.iter().any(|p| p.0.is_none()) => {
                return Err(FormatError::Line {
                    line,
                    reason: format!("{v}: an unconditional term has exactly one line"),
                })
            }
            _ => {
                let ps: Vec<GuardedPair> = pairs
                    .iter()
                    .map(|&(g, w)| GuardedPair { guard: g.expect("checked above"), value: w })
                    .collect();
                if iterations > 0 && ps.len() == iterations as usize {
                    QTerm::Truncated { pairs: ps, bound: iterations }
                } else {
                    QTerm::Conditional(ps)
                }
            }
        };
        q.insert(v, term)?;
    }
    Ok(q)
}

// ---- flowcharts

#[derive(Serialize, Deserialize)]
struct ChartDoc {
    #[serde(rename = "Vertices")]
    vertices: Vec<VertexDoc>,
    #[serde(rename = "Edges")]
    edges: Vec<EdgeDoc>,
}

#[derive(Serialize, Deserialize)]
struct VertexDoc {
    #[serde(rename = "Id")]
    id: i64,
    #[serde(rename = "Type")]
    ty: i64,
    #[serde(rename = "Content", default)]
    content: String,
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    #[serde(rename = "From")]
    from: i64,
    #[serde(rename = "To")]
    to: i64,
    #[serde(rename = "Type")]
    ty: i64,
}

pub fn parse_flowchart(text: &str) -> Result<Flowchart, FormatError> {
    let doc: ChartDoc = serde_json::from_str(text)?;
    Ok(Flowchart::from_raw(
        doc.vertices.into_iter().map(|v| (v.id, v.ty, v.content)),
        doc.edges.into_iter().map(|e| (e.from, e.to, e.ty)),
    )?)
}

pub fn serialize_flowchart(fc: &Flowchart) -> String {
    let doc = ChartDoc {
        vertices: fc
            .blocks()
            .iter()
            .map(|b| VertexDoc { id: b.id, ty: b.ty.code() as i64, content: b.content.clone() })
            .collect(),
        edges: fc
            .edges()
            .iter()
            .map(|e| EdgeDoc { from: e.from, to: e.to, ty: e.ty.code() as i64 })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("plain data serializes") + "\n"
}

// ---- schedules

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arg {
    /// Result of a scheduled operation.
    Node(u32),
    Var(String),
    Const(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledOp {
    pub node: u32,
    pub op: String,
    pub args: Vec<Arg>,
    /// Tree mode: index of the expression and the operand path to this occurrence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleDoc {
    pub sharing: String,
    pub levels: Vec<Vec<ScheduledOp>>,
}

impl ScheduleDoc {
    pub fn sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }
}

pub fn sharing_name(s: Sharing) -> &'static str {
    match s {
        Sharing::Dag => "dag",
        Sharing::Tree => "tree",
    }
}

pub fn schedule_doc(ar: &ExprArena, s: &Schedule) -> ScheduleDoc {
    let arg = |o: ExprId| match ar.node(o) {
        Node::Var(v) => Arg::Var(v.to_string()),
        Node::Const(c) => Arg::Const(c.to_string()),
        _ => Arg::Node(o.0),
    };
    let levels = s
        .levels
        .iter()
        .map(|level| {
            level
                .iter()
                .map(|inst| {
                    let n = inst.node();
                    let (expr, path) = match inst {
                        Instance::Node(_) => (None, None),
                        Instance::Occurrence { expr, path, .. } => (Some(*expr), Some(path.clone())),
                    };
                    ScheduledOp {
                        node: n.0,
                        op: ar.node(n).op().expect("scheduled nodes are operations").name().to_string(),
                        args: ar.node(n).operands().map(arg).collect(),
                        expr,
                        path,
                    }
                })
                .collect()
        })
        .collect();
    ScheduleDoc { sharing: sharing_name(s.sharing).to_string(), levels }
}

pub fn export_schedule(ar: &ExprArena, s: &Schedule) -> String {
    serde_json::to_string_pretty(&schedule_doc(ar, s)).expect("plain data serializes") + "\n"
}

pub fn parse_schedule(text: &str) -> Result<ScheduleDoc, FormatError> {
    Ok(serde_json::from_str(text)?)
}

// ---- interpretations

/// Parses `name=value` items separated by commas outside parentheses,
/// e.g. `A(1,2)=3, e=1e-6, ok=true`.
pub fn parse_bindings(text: &str) -> Result<Vec<(VarRef, Value)>, FormatError> {
    let mut items = Vec::new();
    let (mut depth, mut start) = (0i32, 0usize);
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                items.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    items.push(&text[start..]);
    let mut out = Vec::new();
    for item in items.into_iter().filter(|s| !s.trim().is_empty()) {
        let (k, v) = item.rsplit_once('=').ok_or_else(|| bad(format!("`{item}` is not name=value")))?;
        let var = VarRef::parse(k).map_err(|e| bad(e.to_string()))?;
        let value = match v.trim() {
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            x => Value::Num(x.parse().map_err(|_| bad(format!("`{x}` is not a number")))?),
        };
        out.push((var, value));
    }
    Ok(out)
}
