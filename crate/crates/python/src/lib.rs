use pyo3::prelude::*;

#[pymodule]
fn qrmsg(_py: Python<'_>, _m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
