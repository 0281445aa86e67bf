//! Per-architecture register name tables.

use crate::error::{Error, Result};
use std::collections::{HashMap, HashSet};
use std::path::Path;

/// Register name sets keyed by lower-cased architecture tag.
///
/// Built-in tables cover x86/x86-64, ARM/AArch32, and MIPS32. Extra
/// architectures load from a plain-text file: one `arch: REG, REG, ...`
/// line each, `#` comments allowed.
#[derive(Debug, Clone)]
pub struct RegisterTables {
    tables: HashMap<String, HashSet<String>>,
}

impl RegisterTables {
    pub fn builtin() -> Self {
        let mut tables = HashMap::new();
        let x86: HashSet<String> = x86_registers();
        tables.insert("x86".to_string(), x86.clone());
        tables.insert("x86-64".to_string(), x86.clone());
        tables.insert("x86_64".to_string(), x86.clone());
        tables.insert("amd64".to_string(), x86);
        let arm = arm_registers();
        tables.insert("arm".to_string(), arm.clone());
        tables.insert("aarch32".to_string(), arm);
        let mips = mips_registers();
        tables.insert("mips".to_string(), mips.clone());
        tables.insert("mips32".to_string(), mips);
        RegisterTables { tables }
    }

    /// Register table for an architecture, or `None` when unknown.
    pub fn lookup(&self, arch: &str) -> Option<&HashSet<String>> {
        self.tables.get(&arch.to_lowercase())
    }

    pub fn supports(&self, arch: &str) -> bool {
        self.lookup(arch).is_some()
    }

    /// Merge extra tables from a plain-text file.
    pub fn load_extra(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (arch, regs) = line.split_once(':').ok_or_else(|| Error::Config(format!(
                "{}:{}: expected `arch: REG, REG, ...`",
                path.display(),
                lineno + 1
            )))?;
            let entry = self
                .tables
                .entry(arch.trim().to_lowercase())
                .or_default();
            for reg in regs.split(',') {
                let reg = reg.trim();
                if !reg.is_empty() {
                    entry.insert(reg.to_uppercase());
                }
            }
        }
        Ok(())
    }
}

fn collect(names: impl IntoIterator<Item = String>) -> HashSet<String> {
    names.into_iter().collect()
}

fn x86_registers() -> HashSet<String> {
    let mut names: Vec<String> = vec![
        "RAX", "RBX", "RCX", "RDX", "RSI", "RDI", "RBP", "RSP", "RIP", "EAX", "EBX", "ECX",
        "EDX", "ESI", "EDI", "EBP", "ESP", "EIP", "AX", "BX", "CX", "DX", "SI", "DI", "BP",
        "SP", "AL", "AH", "BL", "BH", "CL", "CH", "DL", "DH", "SIL", "DIL", "BPL", "SPL", "CS",
        "DS", "ES", "FS", "GS", "SS",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    for i in 8..16 {
        names.push(format!("R{i}"));
        names.push(format!("R{i}D"));
        names.push(format!("R{i}W"));
        names.push(format!("R{i}B"));
    }
    for i in 0..16 {
        names.push(format!("XMM{i}"));
        names.push(format!("YMM{i}"));
        names.push(format!("ST{i}"));
    }
    collect(names)
}

fn arm_registers() -> HashSet<String> {
    let mut names: Vec<String> = vec!["SP", "LR", "PC", "FP", "IP", "SL", "SB", "CPSR", "APSR"]
        .into_iter()
        .map(String::from)
        .collect();
    for i in 0..16 {
        names.push(format!("R{i}"));
    }
    for i in 0..32 {
        names.push(format!("S{i}"));
        names.push(format!("D{i}"));
        names.push(format!("Q{i}"));
    }
    collect(names)
}

fn mips_registers() -> HashSet<String> {
    let mut names: Vec<String> = vec![
        "ZERO", "AT", "GP", "SP", "FP", "RA", "HI", "LO", "PC", "K0", "K1",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    for i in 0..2 {
        names.push(format!("V{i}"));
    }
    for i in 0..4 {
        names.push(format!("A{i}"));
    }
    for i in 0..10 {
        names.push(format!("T{i}"));
    }
    for i in 0..9 {
        names.push(format!("S{i}"));
    }
    for i in 0..32 {
        names.push(format!("F{i}"));
        names.push(format!("${i}"));
    }
    collect(names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn builtin_membership() {
        let t = RegisterTables::builtin();
        assert!(t.lookup("arm").unwrap().contains("R4"));
        assert!(t.lookup("x86").unwrap().contains("RBP"));
        assert!(t.lookup("mips").unwrap().contains("T9"));
        assert!(t.lookup("MIPS").is_some());
        assert!(t.lookup("riscv").is_none());
    }

    #[test]
    fn load_extra_tables() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# toy dialects").unwrap();
        writeln!(f, "dialect-a: r0, r1, r2").unwrap();
        writeln!(f, "dialect-b: v0, v1").unwrap();
        let mut t = RegisterTables::builtin();
        t.load_extra(f.path()).unwrap();
        assert!(t.lookup("dialect-a").unwrap().contains("R1"));
        assert!(t.lookup("dialect-b").unwrap().contains("V0"));
    }
}
