//! Deterministic trace transforms with automatic Jacobian reduction.
//!
//! A transform program maps an input pair of traces — the model's latents
//! and an auxiliary trace — to an output pair, reading and writing through a
//! [`Ctx`] that records everything the program touches. Continuous reads
//! return [`DiffScalar`]s seeded against fresh tangent slots, so a single
//! forward execution yields both the output traces and the dense Jacobian of
//! written outputs with respect to read inputs.
//!
//! Verbatim copies are declared rather than computed: `copy` and friends
//! move a value to the output without creating tangents. Each copied input
//! slot contributes a standard-basis column to the full Jacobian, and
//! expanding the determinant along that column removes the column together
//! with the copy's row — an identity that holds even when other outputs read
//! the copied input. The engine therefore builds only the *reduced* matrix:
//! rows are expression-read input slots that were not copied, columns are
//! expression-written output slots, and its log-absolute-determinant equals
//! that of the full map. A transform touching thousands of addresses but
//! rewriting six coordinates pays for a 6×6 determinant.
//!
//! Reads falling on observed addresses come back as constants (observations
//! are not coordinates of the state space), discrete values carry no
//! tangents at all, and every structural mistake — writing twice, leaving a
//! vector half-written, a non-square reduced matrix — surfaces as a
//! [`TransformError`] at runtime rather than silently corrupting a density.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::addr::Address;
use crate::autodiff::{log_abs_det, DiffScalar};
use crate::trace::{Trace, TraceBuilder};
use crate::value::{Discrete, Value, ValueError};

/// Which input trace a read refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum In {
    Model,
    Aux,
}

/// Which output trace a write refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Out {
    Model,
    Aux,
}

impl fmt::Display for In {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            In::Model => "model",
            In::Aux => "aux",
        })
    }
}

impl fmt::Display for Out {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Out::Model => "model",
            Out::Aux => "aux",
        })
    }
}

/// How unwritten model addresses are treated when a transform finishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CopyMode {
    /// The output traces consist of exactly what the program wrote.
    Explicit,
    /// The model output is a sparse delta; model addresses the program read
    /// but never wrote are implicitly copied, and their Jacobian columns are
    /// eliminated like any other copy.
    ImplicitModel,
}

/// A structural failure inside a transform program.
#[derive(Debug, thiserror::Error)]
pub enum TransformError {
    #[error("transform read {side} address `{addr}`, which does not exist")]
    MissingInput { side: In, addr: Address },
    #[error("transform expected {expected} at `{addr}`")]
    WrongKind { addr: Address, expected: &'static str },
    #[error("slot {index} is out of range for `{addr}` (length {len})")]
    SlotOutOfRange { addr: Address, index: usize, len: usize },
    #[error("`{addr}` was declared with length {declared} but used with length {len}")]
    LengthMismatch { addr: Address, declared: usize, len: usize },
    #[error("transform wrote `{addr}` slot {index} twice")]
    DuplicateWrite { addr: Address, index: usize },
    #[error("`{addr}` was written both as discrete and as continuous")]
    ShapeConflict { addr: Address },
    #[error("input slot {index} of `{addr}` was copied more than once")]
    DuplicateCopySource { addr: Address, index: usize },
    #[error("vector at `{addr}` is missing {missing} of its declared slots")]
    PartialVector { addr: Address, missing: usize },
    #[error("transform wrote observed address `{addr}`")]
    ObservationWrite { addr: Address },
    #[error("`{addr}` is explicitly copied elsewhere but also implicitly copied in place")]
    ImplicitCopyConflict { addr: Address },
    #[error("reduced Jacobian is not square: {reads} tracked reads vs {writes} writes")]
    DimensionMismatch { reads: usize, writes: usize },
    #[error(transparent)]
    Value(#[from] ValueError),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct InSlot {
    side: In,
    addr: Address,
    idx: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct OutSlot {
    side: Out,
    addr: Address,
    idx: usize,
}

enum WriteKind {
    Expr(DiffScalar),
    Copy(f64),
    Discrete(Discrete),
    Derived(f64),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Shape {
    Continuous(usize),
    Discrete,
}

enum Located {
    Latent(Value),
    Observed(Value),
}

/// The read/write context handed to a transform program.
pub struct Ctx<'a> {
    model_in: &'a Trace,
    obs: &'a Trace,
    aux_in: &'a Trace,
    tangents: BTreeMap<InSlot, usize>,
    copied: BTreeMap<InSlot, OutSlot>,
    writes: BTreeMap<OutSlot, WriteKind>,
    shapes: BTreeMap<(Out, Address), Shape>,
}

impl<'a> Ctx<'a> {
    fn new(model_in: &'a Trace, obs: &'a Trace, aux_in: &'a Trace) -> Self {
        Ctx {
            model_in,
            obs,
            aux_in,
            tangents: BTreeMap::new(),
            copied: BTreeMap::new(),
            writes: BTreeMap::new(),
            shapes: BTreeMap::new(),
        }
    }

    fn locate(&self, side: In, addr: &Address) -> Result<Located, TransformError> {
        match side {
            In::Model => {
                if let Some(v) = self.model_in.get(addr) {
                    Ok(Located::Latent(v.clone()))
                } else if let Some(v) = self.obs.get(addr) {
                    Ok(Located::Observed(v.clone()))
                } else {
                    Err(TransformError::MissingInput { side, addr: addr.clone() })
                }
            }
            In::Aux => self
                .aux_in
                .get(addr)
                .map(|v| Located::Latent(v.clone()))
                .ok_or_else(|| TransformError::MissingInput { side, addr: addr.clone() }),
        }
    }

    fn seed(&mut self, slot: InSlot, value: f64) -> DiffScalar {
        let next = self.tangents.len();
        let index = *self.tangents.entry(slot).or_insert(next);
        DiffScalar::seeded(value, index)
    }

    fn continuous_at(
        &self,
        side: In,
        addr: &Address,
    ) -> Result<(Vec<f64>, bool), TransformError> {
        let (value, observed) = match self.locate(side, addr)? {
            Located::Latent(v) => (v, false),
            Located::Observed(v) => (v, true),
        };
        match value.as_vector() {
            Some(xs) => Ok((xs.to_vec(), observed)),
            None => Err(TransformError::WrongKind {
                addr: addr.clone(),
                expected: "a continuous value",
            }),
        }
    }

    /// Reads the scalar at `addr`, seeding a tangent slot unless the address
    /// is observed (observed reads are constants).
    pub fn read(&mut self, side: In, addr: impl Into<Address>) -> Result<DiffScalar, TransformError> {
        let addr = addr.into();
        let (xs, observed) = self.continuous_at(side, &addr)?;
        if xs.len() != 1 {
            return Err(TransformError::WrongKind { addr, expected: "a scalar" });
        }
        if observed {
            return Ok(DiffScalar::constant(xs[0]));
        }
        Ok(self.seed(InSlot { side, addr, idx: 0 }, xs[0]))
    }

    /// Reads element `index` of the vector at `addr`.
    pub fn read_slot(
        &mut self,
        side: In,
        addr: impl Into<Address>,
        index: usize,
    ) -> Result<DiffScalar, TransformError> {
        let addr = addr.into();
        let (xs, observed) = self.continuous_at(side, &addr)?;
        if index >= xs.len() {
            return Err(TransformError::SlotOutOfRange { addr, index, len: xs.len() });
        }
        if observed {
            return Ok(DiffScalar::constant(xs[index]));
        }
        let value = xs[index];
        Ok(self.seed(InSlot { side, addr, idx: index }, value))
    }

    /// Reads every element of the vector at `addr`, seeding each slot.
    pub fn read_vec(
        &mut self,
        side: In,
        addr: impl Into<Address>,
    ) -> Result<Vec<DiffScalar>, TransformError> {
        let addr = addr.into();
        let (xs, observed) = self.continuous_at(side, &addr)?;
        if observed {
            return Ok(xs.into_iter().map(DiffScalar::constant).collect());
        }
        Ok(xs
            .into_iter()
            .enumerate()
            .map(|(i, x)| self.seed(InSlot { side, addr: addr.clone(), idx: i }, x))
            .collect())
    }

    /// Reads the discrete value at `addr`.
    pub fn read_discrete(
        &mut self,
        side: In,
        addr: impl Into<Address>,
    ) -> Result<Discrete, TransformError> {
        let addr = addr.into();
        let value = match self.locate(side, &addr)? {
            Located::Latent(v) | Located::Observed(v) => v,
        };
        value
            .as_discrete()
            .cloned()
            .ok_or(TransformError::WrongKind { addr, expected: "a discrete value" })
    }

    /// Reads a discrete integer at `addr`.
    pub fn read_int(&mut self, side: In, addr: impl Into<Address>) -> Result<i64, TransformError> {
        let addr = addr.into();
        match self.read_discrete(side, addr.clone())? {
            Discrete::Int(n) => Ok(n),
            _ => Err(TransformError::WrongKind { addr, expected: "an integer" }),
        }
    }

    /// Reads a discrete boolean at `addr`.
    pub fn read_bool(&mut self, side: In, addr: impl Into<Address>) -> Result<bool, TransformError> {
        let addr = addr.into();
        match self.read_discrete(side, addr.clone())? {
            Discrete::Bool(b) => Ok(b),
            _ => Err(TransformError::WrongKind { addr, expected: "a boolean" }),
        }
    }

    /// True when the input side has a value at `addr` (observed counts for
    /// the model side).
    pub fn has(&self, side: In, addr: impl Into<Address>) -> bool {
        let addr = addr.into();
        match side {
            In::Model => self.model_in.contains(&addr) || self.obs.contains(&addr),
            In::Aux => self.aux_in.contains(&addr),
        }
    }

    /// The length of the continuous vector at `addr`.
    pub fn vec_len(&self, side: In, addr: impl Into<Address>) -> Result<usize, TransformError> {
        let addr = addr.into();
        let (xs, _) = self.continuous_at(side, &addr)?;
        Ok(xs.len())
    }

    /// Input addresses on `side` beginning with `prefix`, in order.
    pub fn addresses_under(&self, side: In, prefix: &Address) -> Vec<Address> {
        match side {
            In::Model => self
                .model_in
                .under(prefix)
                .map(|(a, _)| a.clone())
                .collect(),
            In::Aux => self.aux_in.under(prefix).map(|(a, _)| a.clone()).collect(),
        }
    }

    fn declare(
        &mut self,
        side: Out,
        addr: &Address,
        shape: Shape,
    ) -> Result<(), TransformError> {
        if side == Out::Model && self.obs.contains(addr) {
            return Err(TransformError::ObservationWrite { addr: addr.clone() });
        }
        match self.shapes.get(&(side, addr.clone())) {
            None => {
                self.shapes.insert((side, addr.clone()), shape);
                Ok(())
            }
            Some(&existing) if existing == shape => Ok(()),
            Some(&Shape::Continuous(declared)) => {
                if let Shape::Continuous(len) = shape {
                    Err(TransformError::LengthMismatch { addr: addr.clone(), declared, len })
                } else {
                    Err(TransformError::ShapeConflict { addr: addr.clone() })
                }
            }
            Some(&Shape::Discrete) => Err(TransformError::ShapeConflict { addr: addr.clone() }),
        }
    }

    fn put(&mut self, slot: OutSlot, kind: WriteKind) -> Result<(), TransformError> {
        if self.writes.contains_key(&slot) {
            return Err(TransformError::DuplicateWrite { addr: slot.addr, index: slot.idx });
        }
        self.writes.insert(slot, kind);
        Ok(())
    }

    /// Writes a scalar expression to `addr`.
    pub fn write(
        &mut self,
        side: Out,
        addr: impl Into<Address>,
        value: DiffScalar,
    ) -> Result<(), TransformError> {
        let addr = addr.into();
        self.declare(side, &addr, Shape::Continuous(1))?;
        self.put(OutSlot { side, addr, idx: 0 }, WriteKind::Expr(value))
    }

    /// Writes element `index` of a vector of declared length `len`.
    pub fn write_slot(
        &mut self,
        side: Out,
        addr: impl Into<Address>,
        index: usize,
        len: usize,
        value: DiffScalar,
    ) -> Result<(), TransformError> {
        let addr = addr.into();
        if len == 0 || index >= len {
            return Err(TransformError::SlotOutOfRange { addr, index, len });
        }
        self.declare(side, &addr, Shape::Continuous(len))?;
        self.put(OutSlot { side, addr, idx: index }, WriteKind::Expr(value))
    }

    /// Writes element `index` of a vector as a *derived* value: one whose
    /// content is fully determined by the other coordinates and therefore is
    /// not a degree of freedom of the map. The value lands in the output
    /// trace but contributes no Jacobian row.
    ///
    /// The canonical use is the last coordinate of a simplex-valued address:
    /// a length-`k` weights vector has `k - 1` free slots, and the transform
    /// writes the determined slot with this method so the dimension check
    /// balances. The engine cannot verify the claim; a false one shows up as
    /// a broken involution or a detectably wrong determinant.
    pub fn write_slot_derived(
        &mut self,
        side: Out,
        addr: impl Into<Address>,
        index: usize,
        len: usize,
        value: f64,
    ) -> Result<(), TransformError> {
        let addr = addr.into();
        if len == 0 || index >= len {
            return Err(TransformError::SlotOutOfRange { addr, index, len });
        }
        self.declare(side, &addr, Shape::Continuous(len))?;
        self.put(OutSlot { side, addr, idx: index }, WriteKind::Derived(value))
    }

    /// Writes a whole vector of expressions to `addr`.
    pub fn write_vec(
        &mut self,
        side: Out,
        addr: impl Into<Address>,
        values: Vec<DiffScalar>,
    ) -> Result<(), TransformError> {
        let addr = addr.into();
        let len = values.len();
        for (i, v) in values.into_iter().enumerate() {
            self.write_slot(side, addr.clone(), i, len, v)?;
        }
        Ok(())
    }

    /// Writes a discrete value to `addr`.
    pub fn write_discrete(
        &mut self,
        side: Out,
        addr: impl Into<Address>,
        value: impl Into<Discrete>,
    ) -> Result<(), TransformError> {
        let addr = addr.into();
        self.declare(side, &addr, Shape::Discrete)?;
        self.put(OutSlot { side, addr, idx: 0 }, WriteKind::Discrete(value.into()))
    }

    fn copy_continuous_slot(
        &mut self,
        from: InSlot,
        to: OutSlot,
        value: f64,
        observed: bool,
    ) -> Result<(), TransformError> {
        if observed {
            // An observation is not a coordinate of the state space, so this
            // "copy" is a constant write. The zero tangent column makes the
            // Jacobian singular, which is exactly what such a map deserves.
            log::warn!(
                "copy from observed `{}` is a constant write; the Jacobian will be singular",
                from.addr
            );
            return self.put(to, WriteKind::Expr(DiffScalar::constant(value)));
        }
        if self.copied.contains_key(&from) {
            return Err(TransformError::DuplicateCopySource {
                addr: from.addr,
                index: from.idx,
            });
        }
        self.copied.insert(from, to.clone());
        self.put(to, WriteKind::Copy(value))
    }

    /// Copies the whole value at an input address to an output address.
    /// Continuous values copy slot-by-slot; discrete values copy as-is.
    pub fn copy_as(
        &mut self,
        side: In,
        addr: impl Into<Address>,
        out_side: Out,
        out_addr: impl Into<Address>,
    ) -> Result<(), TransformError> {
        let addr = addr.into();
        let out_addr = out_addr.into();
        let (value, observed) = match self.locate(side, &addr)? {
            Located::Latent(v) => (v, false),
            Located::Observed(v) => (v, true),
        };
        match value {
            Value::Discrete(d) => {
                self.declare(out_side, &out_addr, Shape::Discrete)?;
                self.put(
                    OutSlot { side: out_side, addr: out_addr, idx: 0 },
                    WriteKind::Discrete(d),
                )
            }
            Value::Continuous(xs) => {
                let len = xs.len();
                self.declare(out_side, &out_addr, Shape::Continuous(len))?;
                for (i, x) in xs.into_iter().enumerate() {
                    self.copy_continuous_slot(
                        InSlot { side, addr: addr.clone(), idx: i },
                        OutSlot { side: out_side, addr: out_addr.clone(), idx: i },
                        x,
                        observed,
                    )?;
                }
                Ok(())
            }
        }
    }

    /// Copies an address to the corresponding output side unchanged.
    pub fn copy(&mut self, side: In, addr: impl Into<Address>) -> Result<(), TransformError> {
        let addr = addr.into();
        let out = match side {
            In::Model => Out::Model,
            In::Aux => Out::Aux,
        };
        self.copy_as(side, addr.clone(), out, addr)
    }

    /// Copies one vector element between input and output slots; the output
    /// vector's total length must be declared.
    #[allow(clippy::too_many_arguments)]
    pub fn copy_slot(
        &mut self,
        side: In,
        addr: impl Into<Address>,
        index: usize,
        out_side: Out,
        out_addr: impl Into<Address>,
        out_index: usize,
        out_len: usize,
    ) -> Result<(), TransformError> {
        let addr = addr.into();
        let out_addr = out_addr.into();
        let (xs, observed) = self.continuous_at(side, &addr)?;
        if index >= xs.len() {
            return Err(TransformError::SlotOutOfRange { addr, index, len: xs.len() });
        }
        if out_len == 0 || out_index >= out_len {
            return Err(TransformError::SlotOutOfRange {
                addr: out_addr,
                index: out_index,
                len: out_len,
            });
        }
        self.declare(out_side, &out_addr, Shape::Continuous(out_len))?;
        let value = xs[index];
        self.copy_continuous_slot(
            InSlot { side, addr, idx: index },
            OutSlot { side: out_side, addr: out_addr, idx: out_index },
            value,
            observed,
        )
    }

    /// Copies every input address under `prefix` to the output side, with
    /// `prefix` replaced by `out_prefix`.
    pub fn copy_namespace(
        &mut self,
        side: In,
        prefix: &Address,
        out_side: Out,
        out_prefix: &Address,
    ) -> Result<(), TransformError> {
        for addr in self.addresses_under(side, prefix) {
            let out_addr = match addr.strip_prefix(prefix) {
                Some(suffix) => suffix.under(out_prefix),
                // The address *is* the prefix; it maps to the bare target.
                None => out_prefix.clone(),
            };
            self.copy_as(side, addr, out_side, out_addr)?;
        }
        Ok(())
    }
}

/// The outcome of running a transform program to completion.
#[derive(Debug)]
pub struct TransformResult {
    /// The model-side output: the full latent trace in [`CopyMode::Explicit`]
    /// mode, or a sparse delta in [`CopyMode::ImplicitModel`] mode.
    pub model_out: Trace,
    /// The auxiliary-side output trace.
    pub aux_out: Trace,
    /// Log absolute determinant of the reduced Jacobian; `-inf` when the
    /// matrix is singular.
    pub log_abs_det: f64,
    /// The reduced Jacobian: `matrix[i][j]` is the derivative of write `j`
    /// with respect to read `i`.
    pub matrix: Vec<Vec<f64>>,
    /// Human-readable labels for the matrix rows (tracked input slots).
    pub row_labels: Vec<String>,
    /// Human-readable labels for the matrix columns (expression writes).
    pub col_labels: Vec<String>,
}

impl TransformResult {
    /// The side length of the reduced Jacobian.
    pub fn reduced_dim(&self) -> usize {
        self.matrix.len()
    }
}

type TransformProgram = dyn Fn(&mut Ctx<'_>) -> Result<(), TransformError> + Send + Sync;

/// A named deterministic transform over trace pairs.
#[derive(Clone)]
pub struct Transform {
    name: String,
    program: Arc<TransformProgram>,
}

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transform").field("name", &self.name).finish()
    }
}

impl Transform {
    pub fn new(
        name: impl Into<String>,
        program: impl Fn(&mut Ctx<'_>) -> Result<(), TransformError> + Send + Sync + 'static,
    ) -> Self {
        Transform { name: name.into(), program: Arc::new(program) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Runs the program on `(model_in, aux_in)` with observations `obs` and
    /// assembles outputs plus the reduced Jacobian determinant.
    pub fn apply(
        &self,
        model_in: &Trace,
        obs: &Trace,
        aux_in: &Trace,
        mode: CopyMode,
    ) -> Result<TransformResult, TransformError> {
        let mut ctx = Ctx::new(model_in, obs, aux_in);
        (self.program)(&mut ctx)?;
        finish(ctx, mode)
    }
}

fn finish(ctx: Ctx<'_>, mode: CopyMode) -> Result<TransformResult, TransformError> {
    let Ctx { tangents, copied, writes, shapes, .. } = ctx;

    // Assemble output traces address by address, checking vector coverage.
    let mut model_out = TraceBuilder::new();
    let mut aux_out = TraceBuilder::new();
    for (&(side, ref addr), &shape) in &shapes {
        let value = match shape {
            Shape::Discrete => {
                let slot = OutSlot { side, addr: addr.clone(), idx: 0 };
                match writes.get(&slot) {
                    Some(WriteKind::Discrete(d)) => Value::Discrete(d.clone()),
                    _ => unreachable!("discrete shape declared without a discrete write"),
                }
            }
            Shape::Continuous(len) => {
                let mut xs = Vec::with_capacity(len);
                for idx in 0..len {
                    let slot = OutSlot { side, addr: addr.clone(), idx };
                    match writes.get(&slot) {
                        Some(WriteKind::Expr(d)) => xs.push(d.primal()),
                        Some(WriteKind::Copy(v)) => xs.push(*v),
                        Some(WriteKind::Derived(v)) => xs.push(*v),
                        Some(WriteKind::Discrete(_)) => {
                            unreachable!("continuous shape holding a discrete write")
                        }
                        None => {
                            return Err(TransformError::PartialVector {
                                addr: addr.clone(),
                                missing: (0..len)
                                    .filter(|&i| {
                                        !writes.contains_key(&OutSlot {
                                            side,
                                            addr: addr.clone(),
                                            idx: i,
                                        })
                                    })
                                    .count(),
                            });
                        }
                    }
                }
                Value::continuous(xs)?
            }
        };
        let builder = match side {
            Out::Model => &mut model_out,
            Out::Aux => &mut aux_out,
        };
        builder
            .insert(addr.clone(), value)
            .expect("slot-level duplicate detection precedes assembly");
    }

    // Under implicit copying, model addresses that were read but never
    // written are copies in absentia: drop their tangent columns too.
    let model_out_addrs: std::collections::BTreeSet<&Address> = shapes
        .keys()
        .filter(|(side, _)| *side == Out::Model)
        .map(|(_, addr)| addr)
        .collect();
    let implicitly_copied = |slot: &InSlot| -> bool {
        mode == CopyMode::ImplicitModel
            && slot.side == In::Model
            && !model_out_addrs.contains(&slot.addr)
    };
    if mode == CopyMode::ImplicitModel {
        for slot in copied.keys() {
            if slot.side == In::Model && !model_out_addrs.contains(&slot.addr) {
                return Err(TransformError::ImplicitCopyConflict { addr: slot.addr.clone() });
            }
        }
    }

    // Reduced Jacobian: kept reads are rows, expression writes are columns.
    let rows: Vec<(&InSlot, usize)> = tangents
        .iter()
        .filter(|(slot, _)| !copied.contains_key(slot) && !implicitly_copied(slot))
        .map(|(slot, &t)| (slot, t))
        .collect();
    let cols: Vec<(&OutSlot, &DiffScalar)> = writes
        .iter()
        .filter_map(|(slot, kind)| match kind {
            WriteKind::Expr(d) => Some((slot, d)),
            _ => None,
        })
        .collect();
    if rows.len() != cols.len() {
        return Err(TransformError::DimensionMismatch {
            reads: rows.len(),
            writes: cols.len(),
        });
    }
    let matrix: Vec<Vec<f64>> = rows
        .iter()
        .map(|(_, t)| cols.iter().map(|(_, d)| d.derivative(*t)).collect())
        .collect();
    let log_det = log_abs_det(&matrix);

    let slot_label = |addr: &Address, idx: usize, scalar: bool| {
        if scalar {
            addr.to_string()
        } else {
            format!("{addr}[{idx}]")
        }
    };
    let row_labels = rows
        .iter()
        .map(|(s, _)| {
            let scalar = s.idx == 0 && !tangents.keys().any(|o| o.addr == s.addr && o.idx > 0);
            format!("{}:{}", s.side, slot_label(&s.addr, s.idx, scalar))
        })
        .collect();
    let col_labels = cols
        .iter()
        .map(|(s, _)| {
            let scalar = matches!(shapes.get(&(s.side, s.addr.clone())), Some(Shape::Continuous(1)));
            format!("{}:{}", s.side, slot_label(&s.addr, s.idx, scalar))
        })
        .collect();

    Ok(TransformResult {
        model_out: model_out.build(),
        aux_out: aux_out.build(),
        log_abs_det: log_det,
        matrix,
        row_labels,
        col_labels,
    })
}
