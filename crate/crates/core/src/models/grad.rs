/// Addresses one parameter row. F-model pair rows are keyed by entity pair
/// because an unseen pair has no row until it is first updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowKey {
    Row(usize),
    Pair(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradEntry {
    pub block: usize,
    pub row: RowKey,
    offset: usize,
    len: usize,
}

/// Gradient restricted to the rows a single fact touches. Untouched
/// parameters have an implicit zero gradient. Rows are unique: pushing the
/// same `(block, row)` twice accumulates into one entry, which happens when
/// subject and object coincide.
#[derive(Debug, Clone, Default)]
pub struct SparseGrad {
    entries: Vec<GradEntry>,
    values: Vec<f64>,
}

impl SparseGrad {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.values.clear();
    }

    /// Slot for `(block, row)`; zero-initialized on first use.
    pub(crate) fn slot(&mut self, block: usize, row: RowKey, len: usize) -> &mut [f64] {
        if let Some(e) = self.entries.iter().find(|e| e.block == block && e.row == row) {
            debug_assert_eq!(e.len, len);
            let (o, l) = (e.offset, e.len);
            return &mut self.values[o..o + l];
        }
        let offset = self.values.len();
        self.values.resize(offset + len, 0.0);
        self.entries.push(GradEntry { block, row, offset, len });
        &mut self.values[offset..offset + len]
    }

    pub fn entries(&self) -> &[GradEntry] {
        &self.entries
    }

    pub fn values(&self, entry: &GradEntry) -> &[f64] {
        &self.values[entry.offset..entry.offset + entry.len]
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub(crate) fn parts_mut(&mut self) -> (&[GradEntry], &mut [f64]) {
        (&self.entries, &mut self.values)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GradEntry, &[f64])> {
        self.entries.iter().map(move |e| (e, &self.values[e.offset..e.offset + e.len]))
    }
}

impl GradEntry {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}
