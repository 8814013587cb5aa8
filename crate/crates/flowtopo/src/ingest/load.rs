//! CSV loading with imputation, dataset slicing, and write-back.

use std::collections::BTreeSet;
use std::ops::Range;
use std::path::Path;

use ndarray::Array2;

use super::schema::{DatasetSchema, IngestError, SchemaSpec};

/// One parsed flow, in file (time) order.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    /// Ordinal position in the originating file.
    pub index: usize,
    pub src: String,
    pub dst: String,
    pub features: Vec<f64>,
    /// `Some(true)` marks an attack flow when the schema has a label column.
    pub label: Option<bool>,
    pub attack_category: Option<String>,
}

/// An ordered collection of flows plus the schema they were parsed with.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowDataset {
    pub schema: DatasetSchema,
    pub records: Vec<FlowRecord>,
    /// Feature count per record.
    pub m: usize,
}

impl FlowDataset {
    /// Number of records.
    pub fn n(&self) -> usize {
        self.records.len()
    }

    /// Feature matrix X with shape (m, N): one column per flow.
    pub fn feature_matrix(&self) -> Array2<f64> {
        let mut x = Array2::zeros((self.m, self.n()));
        for (j, rec) in self.records.iter().enumerate() {
            for (i, &v) in rec.features.iter().enumerate() {
                x[[i, j]] = v;
            }
        }
        x
    }

    /// Label vector, present only when every record carries a label.
    pub fn label_vec(&self) -> Option<Vec<bool>> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Count of attack-labeled records.
    pub fn n_positive(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.label == Some(true))
            .count()
    }

    /// Sub-dataset over `range`, keeping each record's original index.
    pub fn slice_range(&self, range: Range<usize>) -> FlowDataset {
        FlowDataset {
            schema: self.schema.clone(),
            records: self.records[range].to_vec(),
            m: self.m,
        }
    }

    /// Weight column values, one per record.
    pub fn weight_values(&self) -> Vec<f64> {
        let w = self.schema.weight_index();
        self.records.iter().map(|r| r.features[w]).collect()
    }
}

enum Cell {
    Finite(f64),
    PosInf,
    NegInf,
}

fn parse_cell(raw: &str) -> Cell {
    match raw.trim().parse::<f64>() {
        Ok(v) if v.is_nan() => Cell::Finite(0.0),
        Ok(v) if v == f64::INFINITY => Cell::PosInf,
        Ok(v) if v == f64::NEG_INFINITY => Cell::NegInf,
        Ok(v) => Cell::Finite(v),
        Err(_) => Cell::Finite(0.0),
    }
}

/// Loads a dataset whose schema is already resolved. Comma-delimited.
pub fn load_dataset(
    path: impl AsRef<Path>,
    schema: &DatasetSchema,
) -> Result<FlowDataset, IngestError> {
    load_impl(path.as_ref(), b',', |_| Ok(schema.clone()))
}

/// Reads the header, resolves `spec` against it, then loads the records.
pub fn load_with_spec(
    path: impl AsRef<Path>,
    spec: &SchemaSpec,
    delimiter: u8,
) -> Result<FlowDataset, IngestError> {
    load_impl(path.as_ref(), delimiter, |header| spec.resolve(header))
}

fn load_impl(
    path: &Path,
    delimiter: u8,
    resolve: impl FnOnce(&[String]) -> Result<DatasetSchema, IngestError>,
) -> Result<FlowDataset, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::Headers)
        .from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let schema = resolve(&header)?;
    schema.validate()?;

    let position = |column: &str| -> Result<usize, IngestError> {
        header
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| IngestError::MissingColumn {
                column: column.to_string(),
            })
    };
    let src_idx = position(&schema.source_ip_column)?;
    let dst_idx = position(&schema.dest_ip_column)?;
    let label_idx = schema
        .label_column
        .as_deref()
        .map(&position)
        .transpose()?;
    let category_idx = schema
        .attack_category_column
        .as_deref()
        .map(&position)
        .transpose()?;
    let feature_idx: Vec<usize> = schema
        .numeric_feature_columns
        .iter()
        .map(|c| position(c))
        .collect::<Result<_, _>>()?;

    let m = feature_idx.len();
    let mut records: Vec<FlowRecord> = Vec::new();
    // (record, feature, is_positive) cells awaiting the column's finite extremum.
    let mut inf_cells: Vec<(usize, usize, bool)> = Vec::new();
    let mut col_max = vec![f64::NEG_INFINITY; m];
    let mut col_min = vec![f64::INFINITY; m];

    for (index, row) in reader.records().enumerate() {
        let row = row?;
        let get = |i: usize| row.get(i).unwrap_or("");
        let mut features = vec![0.0; m];
        for (fi, &col) in feature_idx.iter().enumerate() {
            match parse_cell(get(col)) {
                Cell::Finite(v) => {
                    features[fi] = v;
                    col_max[fi] = col_max[fi].max(v);
                    col_min[fi] = col_min[fi].min(v);
                }
                Cell::PosInf => inf_cells.push((index, fi, true)),
                Cell::NegInf => inf_cells.push((index, fi, false)),
            }
        }
        let label = label_idx.map(|li| {
            schema
                .positive_label_values
                .contains(get(li).trim())
        });
        let attack_category = category_idx.and_then(|ci| {
            let v = get(ci).trim();
            (!v.is_empty()).then(|| v.to_string())
        });
        records.push(FlowRecord {
            index,
            src: get(src_idx).trim().to_string(),
            dst: get(dst_idx).trim().to_string(),
            features,
            label,
            attack_category,
        });
    }

    if records.is_empty() {
        return Err(IngestError::EmptyDataset(path.display().to_string()));
    }
    for (rec, fi, positive) in inf_cells {
        let extremum = if positive { col_max[fi] } else { col_min[fi] };
        records[rec].features[fi] = if extremum.is_finite() { extremum } else { 0.0 };
    }

    Ok(FlowDataset {
        schema,
        records,
        m,
    })
}

/// Writes a dataset back to comma-delimited text, reloadable with its schema.
pub fn write_dataset(ds: &FlowDataset, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let schema = &ds.schema;
    let mut writer = csv::Writer::from_path(path.as_ref())?;

    let category_is_label = schema.attack_category_column == schema.label_column;
    let mut header: Vec<String> = vec![
        schema.source_ip_column.clone(),
        schema.dest_ip_column.clone(),
    ];
    header.extend(schema.numeric_feature_columns.iter().cloned());
    if let Some(c) = &schema.label_column {
        header.push(c.clone());
    }
    if let Some(c) = &schema.attack_category_column {
        if !category_is_label {
            header.push(c.clone());
        }
    }
    writer.write_record(&header)?;

    let positive = schema
        .positive_label_values
        .iter()
        .next()
        .cloned()
        .unwrap_or_else(|| "1".to_string());
    let negative = ["BENIGN", "0", "normal", "-"]
        .iter()
        .find(|v| !schema.positive_label_values.contains(**v))
        .expect("some negative literal is free")
        .to_string();

    for rec in &ds.records {
        let mut row: Vec<String> = vec![rec.src.clone(), rec.dst.clone()];
        row.extend(rec.features.iter().map(|v| format_float(*v)));
        if schema.label_column.is_some() {
            let cell = match (category_is_label, &rec.attack_category, rec.label) {
                (true, Some(cat), _) => cat.clone(),
                (_, _, Some(true)) => positive.clone(),
                _ => negative.clone(),
            };
            row.push(cell);
        }
        if schema.attack_category_column.is_some() && !category_is_label {
            row.push(rec.attack_category.clone().unwrap_or_default());
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Shortest decimal form that parses back to the same f64.
fn format_float(v: f64) -> String {
    format!("{v}")
}

/// Prefixes of length ⌈f·N⌉ for each fraction, in the given order.
///
/// Fractions must be strictly increasing and in (0, 1]; each returned prefix
/// is a prefix of the next.
pub fn prefix_split(ds: &FlowDataset, fractions: &[f64]) -> Result<Vec<FlowDataset>, IngestError> {
    if fractions.is_empty() {
        return Err(IngestError::InvalidFractions("empty fraction list".into()));
    }
    let mut prev = 0.0;
    for &f in fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(IngestError::InvalidFractions(format!(
                "fraction {f} outside (0, 1]"
            )));
        }
        if f <= prev {
            return Err(IngestError::InvalidFractions(
                "fractions must be strictly increasing".into(),
            ));
        }
        prev = f;
    }
    let n = ds.n();
    Ok(fractions
        .iter()
        .map(|&f| {
            let len = ((f * n as f64).ceil() as usize).min(n);
            ds.slice_range(0..len)
        })
        .collect())
}

/// Distinct attack categories among attack-labeled records, sorted.
pub fn attack_categories(ds: &FlowDataset) -> Vec<String> {
    let set: BTreeSet<String> = ds
        .records
        .iter()
        .filter(|r| r.label == Some(true))
        .filter_map(|r| r.attack_category.clone())
        .collect();
    set.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::super::schema::{CustomSchema, FeatureColumns, PresetKind};
    use super::*;
    use std::io::Write as _;

    fn tiny_spec() -> SchemaSpec {
        SchemaSpec::Custom(CustomSchema {
            name: "tiny".into(),
            source_ip_column: "src".into(),
            dest_ip_column: "dst".into(),
            label_column: Some("label".into()),
            attack_category_column: None,
            feature_columns: FeatureColumns::Explicit(vec!["bytes".into()]),
            summable_weight_column: "bytes".into(),
            positive_label_values: vec!["1".into()],
        })
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_three_row_file() {
        let f = write_temp("src,dst,bytes,label\na,b,10,0\nb,c,20,1\na,c,5,0\n");
        let ds = load_with_spec(f.path(), &tiny_spec(), b',').unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.m, 1);
        assert_eq!(ds.records[1].src, "b");
        assert_eq!(ds.records[1].label, Some(true));
        assert_eq!(ds.records[2].index, 2);
        assert_eq!(ds.records[2].features, vec![5.0]);
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write_temp("src,dst,bytes,label\n");
        let err = load_with_spec(f.path(), &tiny_spec(), b',').unwrap_err();
        assert!(matches!(err, IngestError::EmptyDataset(_)));
    }

    #[test]
    fn infinity_imputes_to_column_finite_extremum() {
        let f = write_temp(
            "src,dst,bytes,label\na,b,10,0\nb,c,Infinity,0\nc,d,30,0\nd,e,-Infinity,0\n",
        );
        let ds = load_with_spec(f.path(), &tiny_spec(), b',').unwrap();
        assert_eq!(ds.records[1].features[0], 30.0);
        assert_eq!(ds.records[3].features[0], 10.0);
    }

    #[test]
    fn all_infinite_column_imputes_to_zero() {
        let f = write_temp("src,dst,bytes,label\na,b,inf,0\nb,c,Infinity,1\n");
        let ds = load_with_spec(f.path(), &tiny_spec(), b',').unwrap();
        assert_eq!(ds.records[0].features[0], 0.0);
        assert_eq!(ds.records[1].features[0], 0.0);
    }

    #[test]
    fn missing_and_non_numeric_impute_to_zero() {
        let f = write_temp("src,dst,bytes,label\na,b,,0\nb,c,oops,1\nc,d,NaN,0\n");
        let ds = load_with_spec(f.path(), &tiny_spec(), b',').unwrap();
        for rec in &ds.records {
            assert_eq!(rec.features[0], 0.0);
        }
    }

    #[test]
    fn all_values_finite_after_imputation() {
        let f = write_temp("src,dst,bytes,label\na,b,1e308,0\nb,c,inf,0\nc,d,-inf,1\n");
        let ds = load_with_spec(f.path(), &tiny_spec(), b',').unwrap();
        assert!(ds
            .records
            .iter()
            .all(|r| r.features.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn round_trip_preserves_records_bit_exactly() {
        let f = write_temp(
            "src,dst,bytes,label\na,b,0.1,0\nb,c,3.141592653589793,1\nc,a,1e-300,0\n",
        );
        let ds = load_with_spec(f.path(), &tiny_spec(), b',').unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_dataset(&ds, out.path()).unwrap();
        let reloaded = load_dataset(out.path(), &ds.schema).unwrap();
        assert_eq!(ds.records, reloaded.records);
    }

    #[test]
    fn round_trip_preserves_categories() {
        let f = write_temp(
            "Source IP,Destination IP,Flow Duration,Total Fwd Packets,Label\n\
             a,b,4,2,BENIGN\nb,c,9,3,DDoS\n",
        );
        let ds = load_with_spec(f.path(), &SchemaSpec::Preset(PresetKind::CicIds2017), b',')
            .unwrap();
        assert_eq!(ds.records[1].label, Some(true));
        assert_eq!(ds.records[1].attack_category.as_deref(), Some("DDoS"));
        let out = tempfile::NamedTempFile::new().unwrap();
        write_dataset(&ds, out.path()).unwrap();
        let reloaded = load_dataset(out.path(), &ds.schema).unwrap();
        assert_eq!(ds.records, reloaded.records);
    }

    #[test]
    fn prefix_split_uses_ceiling_lengths() {
        let rows: String = (0..100)
            .map(|i| format!("n{i},n{},1,0\n", i + 1))
            .collect();
        let f = write_temp(&format!("src,dst,bytes,label\n{rows}"));
        let ds = load_with_spec(f.path(), &tiny_spec(), b',').unwrap();
        let parts = prefix_split(&ds, &[0.01, 0.10]).unwrap();
        assert_eq!(parts[0].n(), 1);
        assert_eq!(parts[1].n(), 10);
        assert_eq!(parts[0].records[0], ds.records[0]);
    }

    #[test]
    fn prefix_split_full_fraction_is_identity() {
        let f = write_temp("src,dst,bytes,label\na,b,1,0\nb,c,2,1\n");
        let ds = load_with_spec(f.path(), &tiny_spec(), b',').unwrap();
        let parts = prefix_split(&ds, &[1.0]).unwrap();
        assert_eq!(parts[0], ds);
    }

    #[test]
    fn prefix_split_rejects_bad_fractions() {
        let f = write_temp("src,dst,bytes,label\na,b,1,0\n");
        let ds = load_with_spec(f.path(), &tiny_spec(), b',').unwrap();
        assert!(prefix_split(&ds, &[]).is_err());
        assert!(prefix_split(&ds, &[0.0]).is_err());
        assert!(prefix_split(&ds, &[0.5, 0.5]).is_err());
        assert!(prefix_split(&ds, &[0.5, 0.2]).is_err());
        assert!(prefix_split(&ds, &[1.5]).is_err());
    }

    #[test]
    fn ceiling_matches_ten_percent_of_full_pass() {
        // ⌈0.1 · 45883⌉ = 4589
        let len = (0.1f64 * 45883.0).ceil() as usize;
        assert_eq!(len, 4589);
    }

    #[test]
    fn slice_range_keeps_original_indices() {
        let f = write_temp("src,dst,bytes,label\na,b,1,0\nb,c,2,1\nc,d,3,0\n");
        let ds = load_with_spec(f.path(), &tiny_spec(), b',').unwrap();
        let tail = ds.slice_range(1..3);
        assert_eq!(tail.records[0].index, 1);
        assert_eq!(tail.records[1].index, 2);
    }
}
