use ildls_demo::{Scene, SIZE};

#[test]
fn ilt_steps_improve_the_print() {
    let mut scene = Scene::new(3).unwrap();
    assert_eq!(scene.target().shape(), (SIZE, SIZE));
    let before = scene.ede().unwrap();
    let first = scene.step(10).unwrap();
    let second = scene.step(10).unwrap();
    assert!(second <= first);
    assert!(scene.trace().len() >= 2);
    let after = scene.ede().unwrap();
    assert!(after < before, "{after} !< {before}");

    scene.reset().unwrap();
    assert_eq!(scene.mask(), *scene.target());
    assert!(scene.trace().is_empty());
}

#[test]
fn aerial_image_is_bounded_and_prints_features() {
    let scene = Scene::new(5).unwrap();
    let image = scene.aerial().unwrap();
    assert!(image.data().iter().all(|&v| v >= 0.0 && v < 2.0));
    assert!(scene.printed().unwrap().sum() > 0.0);
}
