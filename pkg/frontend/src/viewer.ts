/** Rotatable 3D preview: loads the service's GLB into a three.js scene. */

import * as THREE from "three";
import { GLTFLoader } from "three/addons/loaders/GLTFLoader.js";
import { OrbitControls } from "three/addons/controls/OrbitControls.js";

export class PreviewViewer {
  private renderer: THREE.WebGLRenderer;
  private scene: THREE.Scene;
  private camera: THREE.PerspectiveCamera;
  private controls: OrbitControls;
  private loader = new GLTFLoader();
  private current: THREE.Object3D | null = null;

  constructor(canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setPixelRatio(window.devicePixelRatio);
    this.scene = new THREE.Scene();
    this.scene.background = new THREE.Color(0x181a1f);
    this.camera = new THREE.PerspectiveCamera(45, 1, 0.001, 100);
    this.camera.position.set(0, 0, 3);
    this.controls = new OrbitControls(this.camera, canvas);
    this.controls.enableDamping = true;

    const key = new THREE.DirectionalLight(0xffffff, 2.0);
    key.position.set(1, 2, 2);
    this.scene.add(key);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.6));

    const animate = () => {
      requestAnimationFrame(animate);
      this.controls.update();
      this.resizeToDisplay();
      this.renderer.render(this.scene, this.camera);
    };
    animate();
  }

  private resizeToDisplay(): void {
    const canvas = this.renderer.domElement;
    const width = canvas.clientWidth;
    const height = canvas.clientHeight;
    if (canvas.width !== width || canvas.height !== height) {
      this.renderer.setSize(width, height, false);
      this.camera.aspect = width / Math.max(height, 1);
      this.camera.updateProjectionMatrix();
    }
  }

  loadGlb(glb: ArrayBuffer): Promise<void> {
    return new Promise((resolve, reject) => {
      this.loader.parse(
        glb,
        "",
        (gltf) => {
          if (this.current) this.scene.remove(this.current);
          gltf.scene.traverse((obj) => {
            const mesh = obj as THREE.Mesh;
            if (mesh.isMesh) {
              mesh.material = new THREE.MeshStandardMaterial({
                color: 0x7aa2f7,
                side: THREE.DoubleSide,
                flatShading: true,
              });
              mesh.geometry.computeVertexNormals();
            }
          });
          this.current = gltf.scene;
          this.scene.add(gltf.scene);
          this.frame(gltf.scene);
          resolve();
        },
        (err) => reject(err),
      );
    });
  }

  private frame(object: THREE.Object3D): void {
    const box = new THREE.Box3().setFromObject(object);
    const center = box.getCenter(new THREE.Vector3());
    const size = box.getSize(new THREE.Vector3()).length() || 1;
    this.controls.target.copy(center);
    this.camera.position.copy(center).add(new THREE.Vector3(0.2 * size, 0.2 * size, 1.2 * size));
    this.camera.near = size / 1000;
    this.camera.far = size * 100;
    this.camera.updateProjectionMatrix();
  }
}
