//! Printed-technology standard-cell library and voltage laws.
//!
//! A [`CellLibrary`] carries one record per logic function with its area,
//! nominal intrinsic delay, per-pin input capacitance and nominal leakage.
//! Voltage behaviour is captured by a [`VoltageModel`]: an alpha-power-law
//! delay stretch and a linear leakage law.
//!
//! Units are abstract but consistent: area in `mm²`-like units, delay in
//! milliseconds, capacitance in microfarad-equivalents and power in
//! milliwatts, so that `capacitance × (1/ms) × V²` lands in milliwatts.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Logic function implemented by a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CellFunction {
    #[serde(rename = "INV")]
    Inv,
    #[serde(rename = "NAND2")]
    Nand2,
    #[serde(rename = "NOR2")]
    Nor2,
    #[serde(rename = "AND2")]
    And2,
    #[serde(rename = "OR2")]
    Or2,
    #[serde(rename = "XOR2")]
    Xor2,
    #[serde(rename = "XNOR2")]
    Xnor2,
    /// Inputs are `(sel, a, b)`; output is `b` when `sel` is high.
    #[serde(rename = "MUX2")]
    Mux2,
    #[serde(rename = "BUF")]
    Buf,
    #[serde(rename = "TIE0")]
    Tie0,
    #[serde(rename = "TIE1")]
    Tie1,
}

impl CellFunction {
    pub const ALL: [CellFunction; 11] = [
        CellFunction::Inv,
        CellFunction::Nand2,
        CellFunction::Nor2,
        CellFunction::And2,
        CellFunction::Or2,
        CellFunction::Xor2,
        CellFunction::Xnor2,
        CellFunction::Mux2,
        CellFunction::Buf,
        CellFunction::Tie0,
        CellFunction::Tie1,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn arity(self) -> usize {
        match self {
            CellFunction::Tie0 | CellFunction::Tie1 => 0,
            CellFunction::Inv | CellFunction::Buf => 1,
            CellFunction::Mux2 => 3,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellFunction::Inv => "INV",
            CellFunction::Nand2 => "NAND2",
            CellFunction::Nor2 => "NOR2",
            CellFunction::And2 => "AND2",
            CellFunction::Or2 => "OR2",
            CellFunction::Xor2 => "XOR2",
            CellFunction::Xnor2 => "XNOR2",
            CellFunction::Mux2 => "MUX2",
            CellFunction::Buf => "BUF",
            CellFunction::Tie0 => "TIE0",
            CellFunction::Tie1 => "TIE1",
        }
    }

    /// Bit-parallel evaluation over 64 lanes.
    #[inline]
    pub fn eval(self, ins: &[u64]) -> u64 {
        match self {
            CellFunction::Inv => !ins[0],
            CellFunction::Buf => ins[0],
            CellFunction::Nand2 => !(ins[0] & ins[1]),
            CellFunction::Nor2 => !(ins[0] | ins[1]),
            CellFunction::And2 => ins[0] & ins[1],
            CellFunction::Or2 => ins[0] | ins[1],
            CellFunction::Xor2 => ins[0] ^ ins[1],
            CellFunction::Xnor2 => !(ins[0] ^ ins[1]),
            CellFunction::Mux2 => (ins[0] & ins[2]) | (!ins[0] & ins[1]),
            CellFunction::Tie0 => 0,
            CellFunction::Tie1 => !0,
        }
    }
}

impl fmt::Display for CellFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub name: String,
    pub function: CellFunction,
    pub area: f64,
    pub intrinsic_delay: f64,
    pub input_capacitance: f64,
    pub leakage: f64,
}

/// Supply-voltage model shared by timing and power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageModel {
    pub v_nominal: f64,
    pub v_min: f64,
    pub v_step: f64,
    pub v_threshold: f64,
    pub alpha: f64,
}

impl Default for VoltageModel {
    fn default() -> Self {
        VoltageModel {
            v_nominal: 1.0,
            v_min: 0.6,
            v_step: 0.02,
            v_threshold: 0.3,
            alpha: 1.3,
        }
    }
}

impl VoltageModel {
    pub fn validate(&self) -> Result<(), LibraryError> {
        let ok = self.v_nominal > 0.0
            && self.v_step > 0.0
            && self.v_min <= self.v_nominal
            && self.v_min > self.v_threshold
            && self.alpha > 0.0;
        if ok {
            Ok(())
        } else {
            Err(LibraryError::InvalidVoltageModel(*self))
        }
    }

    /// Supply voltages from `v_min` to `v_nominal` inclusive, ascending.
    pub fn grid(&self) -> Vec<f64> {
        let steps = ((self.v_nominal - self.v_min) / self.v_step).round() as usize;
        (0..=steps)
            .map(|i| {
                let v = self.v_min + i as f64 * self.v_step;
                // snap to micro-volts so 0.6 + 20 * 0.02 is exactly 1.0
                (v * 1e6).round() / 1e6
            })
            .collect()
    }

    /// Index of `v` on [`VoltageModel::grid`], if it lies on it.
    pub fn grid_index(&self, v: f64) -> Option<usize> {
        self.grid().iter().position(|g| (g - v).abs() < 1e-9)
    }
}

/// Alpha-power-law delay stretch relative to nominal voltage.
///
/// `((vn - vt) / (v - vt))^alpha * (v / vn)`; exactly 1 at `v_nominal`.
pub fn delay_scale(vm: &VoltageModel, v: f64) -> Result<f64, LibraryError> {
    if !(v > vm.v_threshold) {
        return Err(LibraryError::VoltageOutOfRange {
            v,
            v_threshold: vm.v_threshold,
        });
    }
    if v == vm.v_nominal {
        return Ok(1.0);
    }
    let num = (vm.v_nominal - vm.v_threshold).powf(vm.alpha);
    let den = (v - vm.v_threshold).powf(vm.alpha);
    Ok(num / den * (v / vm.v_nominal))
}

#[derive(Debug, thiserror::Error)]
pub enum LibraryError {
    #[error("cell library is missing a cell for function {0}")]
    MissingCell(CellFunction),
    #[error("cell library lists function {0} more than once")]
    DuplicateCell(CellFunction),
    #[error("cell {cell}: parameter `{field}` is negative ({value})")]
    NegativeParameter {
        cell: String,
        field: &'static str,
        value: f64,
    },
    #[error("cell {cell}: intrinsic delay must be positive")]
    NonPositiveDelay { cell: String },
    #[error("invalid voltage model {0:?}")]
    InvalidVoltageModel(VoltageModel),
    #[error("supply {v} V is not above the threshold voltage {v_threshold} V")]
    VoltageOutOfRange { v: f64, v_threshold: f64 },
    #[error("wire capacitance must be non-negative")]
    NegativeWireCapacitance,
    #[error("failed to read cell library: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed cell library: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LibraryFile {
    header: String,
    wire_capacitance: f64,
    output_load: f64,
    voltage: VoltageModel,
    cells: Vec<Cell>,
}

/// A validated library with one cell per [`CellFunction`].
#[derive(Debug, Clone, PartialEq)]
pub struct CellLibrary {
    file: LibraryFile,
    by_function: [usize; 11],
}

const DEFAULT_LIBRARY: &str = include_str!("../data/default_library.json");

impl CellLibrary {
    /// The bundled printed-technology library.
    pub fn default_printed() -> CellLibrary {
        CellLibrary::from_json(DEFAULT_LIBRARY).expect("bundled library is valid")
    }

    pub fn default_json() -> &'static str {
        DEFAULT_LIBRARY
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CellLibrary, LibraryError> {
        let text = std::fs::read_to_string(path)?;
        CellLibrary::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<CellLibrary, LibraryError> {
        let file: LibraryFile = serde_json::from_str(text)?;
        CellLibrary::from_parts(file)
    }

    fn from_parts(file: LibraryFile) -> Result<CellLibrary, LibraryError> {
        file.voltage.validate()?;
        if file.wire_capacitance < 0.0 || file.output_load < 0.0 {
            return Err(LibraryError::NegativeWireCapacitance);
        }
        let mut slot = [usize::MAX; 11];
        for (i, cell) in file.cells.iter().enumerate() {
            for (field, value) in [
                ("area", cell.area),
                ("intrinsic_delay", cell.intrinsic_delay),
                ("input_capacitance", cell.input_capacitance),
                ("leakage", cell.leakage),
            ] {
                if value < 0.0 || value.is_nan() {
                    return Err(LibraryError::NegativeParameter {
                        cell: cell.name.clone(),
                        field,
                        value,
                    });
                }
            }
            let is_tie = matches!(cell.function, CellFunction::Tie0 | CellFunction::Tie1);
            if !is_tie && cell.intrinsic_delay <= 0.0 {
                return Err(LibraryError::NonPositiveDelay {
                    cell: cell.name.clone(),
                });
            }
            let idx = cell.function.index();
            if slot[idx] != usize::MAX {
                return Err(LibraryError::DuplicateCell(cell.function));
            }
            slot[idx] = i;
        }
        for f in CellFunction::ALL {
            if slot[f.index()] == usize::MAX {
                return Err(LibraryError::MissingCell(f));
            }
        }
        Ok(CellLibrary {
            file,
            by_function: slot,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.file).expect("library serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LibraryError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn cell(&self, f: CellFunction) -> &Cell {
        &self.file.cells[self.by_function[f.index()]]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.file.cells
    }

    pub fn header(&self) -> &str {
        &self.file.header
    }

    pub fn voltage(&self) -> &VoltageModel {
        &self.file.voltage
    }

    /// Capacitance added per fanout edge for wiring.
    pub fn wire_capacitance(&self) -> f64 {
        self.file.wire_capacitance
    }

    /// Capacitive load of the implicit output register on each output bit.
    pub fn output_load(&self) -> f64 {
        self.file.output_load
    }

    pub fn with_voltage(mut self, vm: VoltageModel) -> Result<CellLibrary, LibraryError> {
        vm.validate()?;
        self.file.voltage = vm;
        Ok(self)
    }

    /// Leakage of one cell at supply `v` (linear in `v`).
    pub fn leakage_at(&self, f: CellFunction, v: f64) -> f64 {
        self.cell(f).leakage * v / self.file.voltage.v_nominal
    }
}
