bool remove(int key){
  while(true){
    @@begin-traversal
    struct node * parent = NULL;
    struct node * curr = root;
    while(curr != NULL && curr->key != key){
      parent = curr;
      curr = key < curr->key ? curr->left : curr->right;
    }
    @@end-traversal
    if(curr == NULL || parent == NULL)
      return false;
    if(parent->left == curr && curr->left == NULL && curr->right == NULL){
      @@delete::block1
      return true;
    }
    if(parent->right == curr && curr->left == NULL && curr->right == NULL){
      @@delete::block2
      return true;
    }
    struct node * cleft = curr->left;
    struct node * sparent = curr->right;
    if(parent->left == curr && cleft != NULL && sparent != NULL && sparent->left != NULL){
      struct node * succ = sparent->left;
      if(succ->left == NULL && succ->right == NULL){
        @@delete::block3
        return true;
      }
    }
    return false;
  }
}
