use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use super::DataError;

/// Column names of the transaction CSV, in the order they are written.
pub const PAYSIM_COLUMNS: [&str; 11] = [
    "step",
    "type",
    "amount",
    "nameOrig",
    "oldbalanceOrg",
    "newbalanceOrig",
    "nameDest",
    "oldbalanceDest",
    "newbalanceDest",
    "isFraud",
    "isFlaggedFraud",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TxType {
    CashIn,
    CashOut,
    Debit,
    Payment,
    Transfer,
}

impl TxType {
    pub const ALL: [TxType; 5] = [
        TxType::CashIn,
        TxType::CashOut,
        TxType::Debit,
        TxType::Payment,
        TxType::Transfer,
    ];

    /// Spelling used in the CSV (`CASH_OUT`).
    pub fn csv_name(self) -> &'static str {
        match self {
            TxType::CashIn => "CASH_IN",
            TxType::CashOut => "CASH_OUT",
            TxType::Debit => "DEBIT",
            TxType::Payment => "PAYMENT",
            TxType::Transfer => "TRANSFER",
        }
    }

    /// Suffix of the one-hot column (`type_cash-out`).
    pub fn slug(self) -> &'static str {
        match self {
            TxType::CashIn => "cash-in",
            TxType::CashOut => "cash-out",
            TxType::Debit => "debit",
            TxType::Payment => "payment",
            TxType::Transfer => "transfer",
        }
    }

    pub fn column_name(self) -> String {
        format!("type_{}", self.slug())
    }

    /// Case-insensitive; `-`, `_` and spaces are interchangeable.
    pub fn parse(s: &str) -> Option<TxType> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match norm.as_str() {
            "cashin" => Some(TxType::CashIn),
            "cashout" => Some(TxType::CashOut),
            "debit" => Some(TxType::Debit),
            "payment" => Some(TxType::Payment),
            "transfer" => Some(TxType::Transfer),
            _ => None,
        }
    }
}

impl fmt::Display for TxType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.csv_name())
    }
}

/// One row of the transaction log.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTransaction {
    /// Hour since the start of the simulation.
    pub step: u32,
    pub tx_type: TxType,
    pub amount: f64,
    pub name_orig: String,
    pub oldbalance_org: f64,
    pub newbalance_orig: f64,
    pub name_dest: String,
    pub oldbalance_dest: f64,
    pub newbalance_dest: f64,
    pub is_fraud: bool,
    pub is_flagged_fraud: bool,
}

fn parse_money(field: &str, col: &str, row: usize) -> Result<f64, DataError> {
    let v: f64 = field.trim().parse().map_err(|_| DataError::ParseError {
        row,
        message: format!("{col}: {field:?} is not a number"),
    })?;
    if !v.is_finite() || v < 0.0 {
        return Err(DataError::ParseError {
            row,
            message: format!("{col}: {field:?} must be finite and non-negative"),
        });
    }
    Ok(v)
}

fn parse_flag(field: &str, col: &str, row: usize) -> Result<bool, DataError> {
    match field.trim() {
        "0" | "false" | "False" => Ok(false),
        "1" | "true" | "True" => Ok(true),
        other => Err(DataError::ParseError {
            row,
            message: format!("{col}: {other:?} is not 0 or 1"),
        }),
    }
}

/// Reads transactions from CSV. Columns may appear in any order; extra
/// columns are ignored. Row numbers in errors count data rows from 1.
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<RawTransaction>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    let missing: Vec<&str> = PAYSIM_COLUMNS
        .iter()
        .copied()
        .filter(|c| !index.contains_key(c))
        .collect();
    if !missing.is_empty() {
        return Err(DataError::SchemaMismatch(format!(
            "missing column(s): {}",
            missing.join(", ")
        )));
    }
    let col = |name: &str| index[name];
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::ParseError {
            row,
            message: e.to_string(),
        })?;
        let get = |name: &str| rec.get(col(name)).unwrap_or("");
        let step = get("step").trim().parse::<u32>().map_err(|_| DataError::ParseError {
            row,
            message: format!("step: {:?} is not a non-negative integer", get("step")),
        })?;
        let tx_type = TxType::parse(get("type")).ok_or_else(|| DataError::ParseError {
            row,
            message: format!("type: unknown transaction type {:?}", get("type")),
        })?;
        out.push(RawTransaction {
            step,
            tx_type,
            amount: parse_money(get("amount"), "amount", row)?,
            name_orig: get("nameOrig").to_string(),
            oldbalance_org: parse_money(get("oldbalanceOrg"), "oldbalanceOrg", row)?,
            newbalance_orig: parse_money(get("newbalanceOrig"), "newbalanceOrig", row)?,
            name_dest: get("nameDest").to_string(),
            oldbalance_dest: parse_money(get("oldbalanceDest"), "oldbalanceDest", row)?,
            newbalance_dest: parse_money(get("newbalanceDest"), "newbalanceDest", row)?,
            is_fraud: parse_flag(get("isFraud"), "isFraud", row)?,
            is_flagged_fraud: parse_flag(get("isFlaggedFraud"), "isFlaggedFraud", row)?,
        });
    }
    Ok(out)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<RawTransaction>, DataError> {
    read_csv(std::fs::File::open(path)?)
}

/// Writes transactions with the standard header. Money columns use two
/// decimals.
pub fn write_csv<W: Write>(rows: &[RawTransaction], writer: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(PAYSIM_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            r.tx_type.csv_name().to_string(),
            format!("{:.2}", r.amount),
            r.name_orig.clone(),
            format!("{:.2}", r.oldbalance_org),
            format!("{:.2}", r.newbalance_orig),
            r.name_dest.clone(),
            format!("{:.2}", r.oldbalance_dest),
            format!("{:.2}", r.newbalance_dest),
            u8::from(r.is_fraud).to_string(),
            u8::from(r.is_flagged_fraud).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "step,type,amount,nameOrig,oldbalanceOrg,newbalanceOrig,nameDest,oldbalanceDest,newbalanceDest,isFraud,isFlaggedFraud";

    #[test]
    fn reads_well_formed_rows() {
        let text = format!(
            "{HEADER}\n1,PAYMENT,9839.64,C1231006815,170136.0,160296.36,M1979787155,0.0,0.0,0,0\n\
             1,TRANSFER,181.0,C1305486145,181.0,0.0,C553264065,0.0,0.0,1,0\n\
             2,CASH_OUT,181.0,C840083671,181.0,0.0,C38997010,21182.0,0.0,1,0\n"
        );
        let rows = read_csv(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].tx_type, TxType::Transfer);
        assert!(rows[2].is_fraud);
        assert_eq!(rows[0].amount, 9839.64);
    }

    #[test]
    fn column_order_does_not_matter() {
        let text = "isFraud,amount,type,step,nameOrig,nameDest,oldbalanceOrg,newbalanceOrig,oldbalanceDest,newbalanceDest,isFlaggedFraud\n\
                    1,5.5,transfer,3,A,B,5.5,0,0,0,0\n";
        let rows = read_csv(text.as_bytes()).unwrap();
        assert_eq!(rows[0].step, 3);
        assert_eq!(rows[0].amount, 5.5);
        assert!(rows[0].is_fraud);
    }

    #[test]
    fn missing_label_column_is_schema_mismatch() {
        let text = "step,type,amount,nameOrig,oldbalanceOrg,newbalanceOrig,nameDest,oldbalanceDest,newbalanceDest,isFlaggedFraud\n";
        assert!(matches!(read_csv(text.as_bytes()), Err(DataError::SchemaMismatch(m)) if m.contains("isFraud")));
    }

    #[test]
    fn negative_amount_reports_its_row() {
        let text = format!("{HEADER}\n1,PAYMENT,1.0,A,1,0,B,0,0,0,0\n1,PAYMENT,-3.0,A,1,0,B,0,0,0,0\n");
        match read_csv(text.as_bytes()) {
            Err(DataError::ParseError { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn write_then_read_round_trips() {
        let rows = vec![RawTransaction {
            step: 7,
            tx_type: TxType::CashOut,
            amount: 1234.56,
            name_orig: "C1".into(),
            oldbalance_org: 2000.0,
            newbalance_orig: 765.44,
            name_dest: "C2".into(),
            oldbalance_dest: 0.0,
            newbalance_dest: 0.0,
            is_fraud: false,
            is_flagged_fraud: false,
        }];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn type_parsing_is_lenient() {
        for t in TxType::ALL {
            assert_eq!(TxType::parse(t.csv_name()), Some(t));
            assert_eq!(TxType::parse(t.slug()), Some(t));
        }
        assert_eq!(TxType::parse("Cash-Out"), Some(TxType::CashOut));
        assert_eq!(TxType::parse("wire"), None);
    }
}
